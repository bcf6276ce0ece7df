// Command-line driver: dispatch, exit codes, manifests, digests and
// determinism.

#include <gtest/gtest.h>
#include <openssl/evp.h>
#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "gkpshadow/io.hpp"

using namespace gkps;
namespace fs = std::filesystem;

namespace {

const std::string kCli = GKPS_CLI_PATH;
const std::string kExamples = GKPS_EXAMPLES_DIR;

struct Result {
    int code = -1;
    std::string out;
};

// Runs the CLI with stderr folded into the captured output.
Result run(const std::string& args, const std::string& env = "") {
    const std::string cmd = env + (env.empty() ? "" : " ") + "'" + kCli + "' " + args + " 2>&1";
    Result r;
    FILE* p = popen(cmd.c_str(), "r");
    if (!p) return r;
    char buf[4096];
    std::size_t k;
    while ((k = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, k);
    const int st = pclose(p);
    r.code = WIFEXITED(st) ? WEXITSTATUS(st) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream f(p, std::ios::binary);
    std::ostringstream os;
    os << f.rdbuf();
    return os.str();
}

std::string sha256_hex(const std::string& data) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr);
    std::ostringstream os;
    for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int(md[i]);
    return os.str();
}

std::vector<json> jsonl(const std::string& text) {
    std::vector<json> v;
    std::istringstream is(text);
    std::string line;
    while (std::getline(is, line))
        if (!line.empty()) v.push_back(json::parse(line));
    return v;
}

class Cli : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::path(::testing::TempDir()) /
               ("gkps_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }
    std::string path(const std::string& name) const { return (dir_ / name).string(); }
    std::string write(const std::string& name, const json& j) const {
        std::ofstream(path(name)) << j.dump(2);
        return path(name);
    }
    fs::path dir_;
};

json shadow_example() { return json::parse(slurp(kExamples + "/shadow-run.json")); }

}  // namespace

TEST_F(Cli, BoundsTable) {
    const Result r = run("bounds --beta 0.1 --nbar 20 --n 1..4");
    ASSERT_EQ(r.code, 0) << r.out;
    std::istringstream is(r.out);
    std::string header, line;
    std::getline(is, header);
    EXPECT_EQ(header.rfind("n,qubit_global", 0), 0u);
    int rows = 0;
    while (std::getline(is, line)) ++rows;
    EXPECT_EQ(rows, 4);
    EXPECT_NE(r.out.find("8.49133097"), std::string::npos);
}

TEST_F(Cli, UsageErrors) {
    const Result a = run("bounds --frobnicate 3");
    EXPECT_EQ(a.code, 1);
    EXPECT_NE(a.out.find("Usage"), std::string::npos);
    EXPECT_EQ(run("").code, 1);
    EXPECT_EQ(run("no-such-command").code, 1);
    EXPECT_EQ(run("sample-lattice --kind nope").code, 1);
    EXPECT_EQ(run("sample-lattice --shards 0").code, 1);
}

TEST_F(Cli, ManifestAndDigests) {
    const std::string out = path("lat.jsonl");
    ASSERT_EQ(run("sample-lattice --n 2 --kind local --count 4 --seed 9 --out '" + out + "'").code, 0);
    const json m = json::parse(slurp(out + ".manifest.json"));
    EXPECT_EQ(m.at("command"), "sample-lattice");
    EXPECT_EQ(m.at("seed"), 9);
    for (const char* k : {"config", "shards", "version", "started", "finished", "outputs", "manifest_digest"})
        EXPECT_TRUE(m.contains(k)) << k;
    const std::string body = slurp(out);
    EXPECT_EQ(m.at("outputs")[0].at("sha256"), sha256_hex(body));
    const auto recs = jsonl(body);
    ASSERT_EQ(recs.size(), 4u);
    for (const auto& r : recs) {
        EXPECT_EQ(r.at("manifest_digest"), m.at("manifest_digest"));
        EXPECT_EQ(r.at("kind"), "local-product");
    }
}

TEST_F(Cli, ShadowRunDeterministic) {
    const std::string a = path("a.jsonl"), b = path("b.jsonl");
    const std::string cfg = kExamples + "/shadow-run.json";
    ASSERT_EQ(run("shadow-run --config '" + cfg + "' --out '" + a + "'").code, 0);
    ASSERT_EQ(run("shadow-run --config '" + cfg + "' --out '" + b + "'").code, 0);
    EXPECT_EQ(slurp(a), slurp(b));
    EXPECT_TRUE(fs::exists(a + ".csv"));
    const json m = json::parse(slurp(a + ".manifest.json"));
    // config echo round-trips through the loader
    EXPECT_EQ(shadow_config_to_json(shadow_config_from_json(m.at("config"))), m.at("config"));
    for (const auto& o : m.at("outputs")) EXPECT_EQ(o.at("sha256"), sha256_hex(slurp(o.at("path").get<std::string>())));
    const auto recs = jsonl(slurp(a));
    ASSERT_EQ(recs.size(), 1u);
    EXPECT_LE(std::abs(recs[0].at("mom").get<double>() - recs[0].at("truth").get<double>()), 0.2);
    // a different seed changes the output
    ASSERT_EQ(run("shadow-run --config '" + cfg + "' --seed 8 --out '" + b + "'").code, 0);
    EXPECT_NE(slurp(a), slurp(b));
}

TEST_F(Cli, LocalExample) {
    const Result r = run("shadow-run --config '" + kExamples + "/shadow-run-local.json'");
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(jsonl(r.out).at(0).at("lattice_kind"), "local-product");
}

TEST_F(Cli, ShardEnvironmentOverride) {
    json cfg = shadow_example();
    cfg.erase("shards");
    cfg["N"] = 2000;
    cfg["K"] = 4;
    const std::string c = write("cfg.json", cfg), out = path("s.jsonl");
    ASSERT_EQ(run("shadow-run --config '" + c + "' --out '" + out + "'", "GKPS_SHARDS=3").code, 0);
    EXPECT_EQ(json::parse(slurp(out + ".manifest.json")).at("shards"), 3);
}

TEST_F(Cli, ConfigSchemaErrors) {
    json eps = shadow_example();
    eps["epsilon"] = 0.0;
    Result r = run("shadow-run --config '" + write("eps.json", eps) + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("config.epsilon"), std::string::npos) << r.out;

    json bk = shadow_example();
    bk["N"] = 100;
    bk["B"] = 10;
    bk["K"] = 3;
    r = run("shadow-run --config '" + write("bk.json", bk) + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("config.N"), std::string::npos) << r.out;

    json unknown = shadow_example();
    unknown["epsilonn"] = 0.1;
    r = run("shadow-run --config '" + write("unk.json", unknown) + "'");
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.out.find("epsilonn"), std::string::npos) << r.out;

    EXPECT_EQ(run("shadow-run --config '" + path("missing.json") + "'").code, 1);
}

TEST_F(Cli, VerifyExitCodes) {
    const Result ok = run("verify-design --check coherent --t 2 --alphas '0,0;1,0' --samples 5000 --seed 1");
    EXPECT_EQ(ok.code, 0) << ok.out;
    EXPECT_NEAR(jsonl(ok.out).at(0).at("target").get<double>(), 1 + std::exp(-1.0), 1e-12);
    // without mixing the two-mode ensemble is a product of Y_1 and the mean
    // value of e^{-pi |x|^2} is (1 + 1)^2 - 1 = 3, not 1
    const Result bad = run("verify-design --check meanvalue --n 2 --steps 0 --samples 2000 --seed 1");
    EXPECT_EQ(bad.code, 2) << bad.out;
    const auto recs = jsonl(bad.out);
    EXPECT_FALSE(recs.at(0).at("pass").get<bool>());
    EXPECT_TRUE(recs.at(0).contains("caveat"));
    EXPECT_EQ(run("verify-design --check nonsense").code, 1);
}

TEST_F(Cli, CircuitExamples) {
    const Result q = run("circuit-sim --config '" + kExamples + "/circuit-sim-qubit.json' --seed 3");
    ASSERT_EQ(q.code, 0) << q.out;
    const json rq = jsonl(q.out).at(0);
    EXPECT_LT(std::abs(rq.at("estimate").get<double>() - rq.at("exact").get<double>()), 4 * rq.at("se").get<double>());
    const Result g = run("circuit-sim --config '" + kExamples + "/circuit-sim-gkp.json' --seed 3");
    ASSERT_EQ(g.code, 0) << g.out;
    const auto rows = jsonl(g.out);
    ASSERT_EQ(rows.size(), 7u);
    EXPECT_NEAR(rows[3].at("estimate")[0].get<double>(), 1.0, 1e-3);
}

TEST_F(Cli, OracleCheck) {
    const Result r = run("oracle-check --count 2 --seed 5");
    ASSERT_EQ(r.code, 0) << r.out;
    for (const auto& rec : jsonl(r.out)) EXPECT_TRUE(rec.at("pass").get<bool>()) << rec.dump();
}
