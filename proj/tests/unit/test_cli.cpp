#include "cli.hpp"

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Invocation {
    int status = 0;
    std::string out;
    std::string err;
};

Invocation invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "gedmd");
    std::vector<char*> argv;
    for (auto& a : args)
        argv.push_back(a.data());
    std::ostringstream out, err;
    Invocation r;
    r.status = gedmd::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
    r.out = out.str();
    r.err = err.str();
    return r;
}

class CliTest : public ::testing::Test {
protected:
    void SetUp() override
    {
        dir_ = fs::temp_directory_path() /
               ("gedmd_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
        fs::remove_all(dir_);
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path write_config(const json& j, const std::string& name = "config.json") const
    {
        std::ofstream(dir_ / name) << j.dump(2);
        return dir_ / name;
    }

    static std::string slurp(const fs::path& p)
    {
        std::ifstream f(p, std::ios::binary);
        return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
    }

    fs::path dir_;
};

json small_identify()
{
    return {{"name", "small"},
            {"seed", 3},
            {"experiments",
             {{{"id", "dw"},
               {"kind", "identify"},
               {"model", {{"name", "double_well"}}},
               {"dictionary", {{"kind", "monomials"}, {"dimension", 2}, {"max_degree", 4}}},
               {"sampling", {{"kind", "uniform"}, {"box", {{-2, 2}, {-1, 1}}}, {"m", 500}}}}}}};
}

}  // namespace

TEST_F(CliTest, EmptyExperimentListIsAUsageError)
{
    const auto cfg = write_config({{"name", "empty"}, {"experiments", json::array()}});
    const Invocation r = invoke({"run", cfg.string(), "--out", (dir_ / "out").string()});
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("experiments"), std::string::npos);
}

TEST_F(CliTest, UnknownFlagIsAUsageError)
{
    EXPECT_EQ(invoke({"list", "--frobnicate"}).status, 2);
    EXPECT_EQ(invoke({"explode"}).status, 2);
    EXPECT_EQ(invoke({}).status, 2);
    EXPECT_EQ(invoke({"run"}).status, 2);
}

TEST_F(CliTest, HelpExitsCleanly)
{
    const Invocation r = invoke({"--help"});
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("run"), std::string::npos);
}

TEST_F(CliTest, ListJsonCoversEveryExperimentKind)
{
    const Invocation r = invoke({"list", "--json"});
    ASSERT_EQ(r.status, 0) << r.err;
    const json j = json::parse(r.out);
    ASSERT_TRUE(j.is_array());
    EXPECT_GE(j.size(), 7u);
    std::set<std::string> kinds;
    for (const auto& c : j) {
        EXPECT_FALSE(c.at("name").get<std::string>().empty());
        EXPECT_FALSE(c.at("description").get<std::string>().empty());
        for (const auto& k : c.at("kinds"))
            kinds.insert(k.get<std::string>());
    }
    for (const char* k : {"estimate", "spectrum", "identify", "conserved", "coarsegrain", "control-mpc",
                          "control-switching"})
        EXPECT_TRUE(kinds.contains(k)) << k;
}

TEST_F(CliTest, ListTextShowsNames)
{
    const Invocation r = invoke({"list"});
    ASSERT_EQ(r.status, 0);
    EXPECT_NE(r.out.find("ou_spectrum"), std::string::npos);
    EXPECT_NE(r.out.find("lemon_slice_coarsegrain"), std::string::npos);
}

TEST_F(CliTest, SchemaViolationsReportFieldPaths)
{
    json cfg = small_identify();
    cfg["experiments"][0]["sampling"].erase("m");
    Invocation r = invoke({"run", write_config(cfg).string(), "--out", (dir_ / "out").string()});
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("experiments[0].sampling.m"), std::string::npos) << r.err;

    cfg = small_identify();
    cfg["experiments"][0]["dictionary"]["max_degree"] = "four";
    r = invoke({"run", write_config(cfg).string(), "--out", (dir_ / "out").string()});
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("experiments[0].dictionary"), std::string::npos) << r.err;

    cfg = small_identify();
    cfg["experiments"][0]["kind"] = "teleport";
    r = invoke({"run", write_config(cfg).string(), "--out", (dir_ / "out").string()});
    EXPECT_EQ(r.status, 2);
    EXPECT_NE(r.err.find("experiments[0].kind"), std::string::npos) << r.err;
}

TEST_F(CliTest, MissingOrMalformedConfigIsAUsageError)
{
    EXPECT_EQ(invoke({"run", (dir_ / "nope.json").string()}).status, 2);
    std::ofstream(dir_ / "bad.json") << "{";
    EXPECT_EQ(invoke({"run", (dir_ / "bad.json").string()}).status, 2);
}

TEST_F(CliTest, ModuleErrorsExitWithStatusOne)
{
    // Degree-1 monomials cannot close the diffusion products.
    json cfg = small_identify();
    cfg["experiments"][0]["dictionary"]["max_degree"] = 1;
    const Invocation r = invoke({"run", write_config(cfg).string(), "--out", (dir_ / "out").string()});
    EXPECT_EQ(r.status, 1);
    EXPECT_NE(r.err.find("experiments[0] (identify)"), std::string::npos) << r.err;
}

TEST_F(CliTest, ManifestEchoesResolvedConfigAndSeeds)
{
    const auto cfg = write_config(small_identify());
    const Invocation r = invoke({"run", cfg.string(), "--out", (dir_ / "out").string(), "--seed", "42"});
    ASSERT_EQ(r.status, 0) << r.err;
    const json m = json::parse(slurp(dir_ / "out" / "manifest.json"));
    EXPECT_EQ(m.at("seed").get<std::uint64_t>(), 42u);
    EXPECT_EQ(m.at("resolved_config").at("seed").get<std::uint64_t>(), 42u);
    EXPECT_EQ(m.at("config_file"), "config.json");
    // Defaults are written back into the resolved config.
    EXPECT_TRUE(m.at("resolved_config").at("experiments")[0].contains("drop_below"));
    const json& e = m.at("experiments")[0];
    EXPECT_EQ(e.at("id"), "dw");
    for (const auto& a : e.at("artifacts"))
        EXPECT_TRUE(fs::exists(dir_ / "out" / "dw" / a.get<std::string>())) << a;
    EXPECT_EQ(slurp(dir_ / "out" / "manifest.json").find(dir_.string()), std::string::npos);
}

TEST_F(CliTest, RerunsAreByteIdentical)
{
    const auto cfg = write_config(small_identify());
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir_ / "a").string()}).status, 0);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir_ / "b").string()}).status, 0);
    std::size_t compared = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dir_ / "a")) {
        if (!entry.is_regular_file())
            continue;
        const fs::path rel = fs::relative(entry.path(), dir_ / "a");
        EXPECT_EQ(slurp(entry.path()), slurp(dir_ / "b" / rel)) << rel;
        ++compared;
    }
    EXPECT_GE(compared, 4u);
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir_ / "c").string(), "--seed", "4"}).status, 0);
    EXPECT_NE(slurp(dir_ / "a" / "dw" / "drift_terms.csv"), slurp(dir_ / "c" / "dw" / "drift_terms.csv"));
}

TEST_F(CliTest, CsvArtifactsHaveHeaders)
{
    const auto cfg = write_config(small_identify());
    ASSERT_EQ(invoke({"run", cfg.string(), "--out", (dir_ / "out").string()}).status, 0);
    const std::string csv = slurp(dir_ / "out" / "dw" / "drift_terms.csv");
    EXPECT_EQ(csv.substr(0, csv.find('\n')), "function,term,coefficient");
}

TEST(CliNode, ReportsPathsAndRecordsDefaults)
{
    const json value = {{"a", {{"b", 1.5}}}, {"list", {1, 2}}};
    json resolved = value;
    const gedmd::cli::Node root(value, resolved, "");
    EXPECT_EQ(root.child("a").number("b"), 1.5);
    EXPECT_EQ(root.child("a").number("c", 2.0), 2.0);
    EXPECT_EQ(resolved["a"]["c"], 2.0);
    try {
        root.child("a").string("b");
        FAIL();
    } catch (const gedmd::cli::UsageError& e) {
        EXPECT_NE(std::string(e.what()).find("a.b"), std::string::npos) << e.what();
    }
    EXPECT_THROW(root.child("missing"), gedmd::cli::UsageError);
    EXPECT_EQ(root.numbers("list"), (std::vector<double>{1, 2}));
}
