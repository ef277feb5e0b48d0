#include <doctest.h>

#include "cli.hpp"
#include "config.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

using namespace encor::cli;
namespace fs = std::filesystem;

namespace
{

struct Result
{
    int code;
    std::string out;
    std::string err;
};

Result invoke(std::vector<std::string> args)
{
    args.insert(args.begin(), "encor");
    std::vector<const char*> argv;
    for (const auto& a : args)
        argv.push_back(a.c_str());
    std::ostringstream out, err;
    int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

struct TempDir
{
    fs::path path;
    TempDir()
    {
        static int n = 0;
        path = fs::temp_directory_path() / ("encor_cli_" + std::to_string(::getpid()) + "_" + std::to_string(n++));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string operator/(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text)
{
    std::ofstream(path, std::ios::binary) << text;
}

Config parse(const std::string& text)
{
    std::istringstream in(text);
    return parse_config(in, "test.cfg");
}

}  // namespace

TEST_CASE("config: defaults, sections, comments and overrides")
{
    auto c = parse("");
    CHECK(c.seed == 1);
    CHECK(c.load.core_service_rate == 1000.0);
    CHECK(c.mec.grid.width == 20);

    c = parse("# run\nseed = 9\nout = res  # trailing\n\n[load]\nrates = 1, 2,8\ncore_service_rate=500\n"
              "[mec]\nwidth=4\nheight=4\ndensities=1,4,16\n[apps]\nforwarding = false\nmoved_ttl_ms=1\n"
              "[placement]\nbudgets_km=100,200\ncore_budgets=1,3\n");
    CHECK(c.seed == 9);
    CHECK(c.out == "res");
    CHECK(c.load.rates == std::vector<double>{1, 2, 8});
    CHECK(c.load.core_service_rate == 500.0);
    CHECK(c.mec.grid.stations() == 16);
    CHECK(c.mec.densities == std::vector<std::uint32_t>{1, 4, 16});
    CHECK_FALSE(c.apps.transport.path.forwarding_enabled);
    CHECK(c.apps.transport.path.moved_ttl == encor::sim::from_ms(1));
    CHECK(c.placement.core_budgets == std::vector<std::size_t>{1, 3});
}

TEST_CASE("config: unknown or malformed entries name the field")
{
    auto key_of = [](const std::string& text) {
        try
        {
            parse(text);
        }
        catch (const ConfigError& e)
        {
            return e.key() + "|" + e.what();
        }
        return std::string("accepted");
    };
    CHECK(key_of("[load]\nfoo = 1\n").rfind("load.foo|test.cfg:2:", 0) == 0);
    CHECK(key_of("rates = 1\n").rfind("rates|", 0) == 0);
    CHECK(key_of("[bogus]\n").rfind("bogus|", 0) == 0);
    CHECK(key_of("[load]\nrates = 4,2\n").find("ascending") != std::string::npos);
    CHECK(key_of("[load]\ncore_service_rate = -3\n").rfind("load.core_service_rate|", 0) == 0);
    CHECK(key_of("[mec]\nwidth = ten\n").rfind("mec.width|", 0) == 0);
    CHECK(key_of("[apps]\nforwarding = maybe\n").rfind("apps.forwarding|", 0) == 0);
    CHECK(key_of("just words\n").rfind("|test.cfg:1:", 0) == 0);
    CHECK(key_of("[load\n").rfind("|", 0) == 0);
    CHECK_THROWS_AS(load_config("/nonexistent/encor.cfg"), ConfigError);
    CHECK(known_keys().size() > 30);
}

TEST_CASE("atomic write replaces the file and leaves no temp behind")
{
    TempDir d;
    write_atomic(d / "sub/x.csv", "a\n");
    write_atomic(d / "sub/x.csv", "b\n");
    CHECK(slurp(d / "sub/x.csv") == "b\n");
    std::size_t files = 0;
    for (const auto& e : fs::directory_iterator(d.path / "sub"))
    {
        (void)e;
        ++files;
    }
    CHECK(files == 1);
}

TEST_CASE("pretty printing aligns columns")
{
    CHECK(pretty_csv("a,bb\nccc,d\n") == "a    bb\nccc  d\n");
    CHECK(pretty_csv("# note\nx\n") == "x\n");
}

TEST_CASE("usage errors exit 1")
{
    CHECK(invoke({}).code == kUsage);
    CHECK(invoke({"bogus"}).code == kUsage);
    CHECK(invoke({"table", "--format", "xml"}).code == kUsage);
    CHECK(invoke({"table", "--nope"}).code == kUsage);
    CHECK(invoke({"mec", "--grid", "20by20"}).code == kUsage);
    CHECK(invoke({"place"}).code == kUsage);
    CHECK(invoke({"--help"}).code == kOk);

    TempDir d;
    spit(d / "bad.cfg", "[mec]\nwidht = 20\n");
    auto r = invoke({"mec", "--config", d / "bad.cfg"});
    CHECK(r.code == kUsage);
    CHECK(r.err.find("mec.widht") != std::string::npos);
}

TEST_CASE("table reports the canonical counts")
{
    auto r = invoke({"table"});
    CHECK(r.code == kOk);
    CHECK(r.out.find("15(15)") != std::string::npos);
    CHECK(r.out.find("7(2)") != std::string::npos);

    r = invoke({"table", "--mode", "direct", "--format", "csv"});
    CHECK(r.code == kOk);
    CHECK(r.out == "label,total,via_core,expected\nlte,15,15,15(15)\nencor-direct,6,0,6(0)\n");

    TempDir d;
    r = invoke({"--out", d.path.string(), "table", "--format", "csv"});
    CHECK(r.code == kOk);
    CHECK(slurp(d / "table.csv") == r.out);
}

TEST_CASE("mec on the default grid ends near c_inter/c_intra")
{
    TempDir d;
    auto r = invoke({"mec", "--grid", "20x20", "--check", "--format", "csv", "--out", d.path.string()});
    REQUIRE(r.code == kOk);
    auto last = r.out.substr(r.out.rfind('\n', r.out.size() - 2) + 1);
    CHECK(last.rfind("400,", 0) == 0);
    CHECK(slurp(d / "mec.csv") == r.out);

    spit(d / "c.cfg", "[mec]\nc_intra = 15\nc_inter = 15\ndensities = 1,4\n");
    r = invoke({"mec", "--config", d / "c.cfg", "--grid", "4x4", "--format", "csv"});
    CHECK(r.code == kOk);
    CHECK(r.out.find("\n4,") != std::string::npos);
}

TEST_CASE("place --synthetic is byte-identical across runs and matches gen + file input")
{
    TempDir a, b, g, f;
    REQUIRE(invoke({"place", "--synthetic", "--seed", "7", "--out", a.path.string()}).code == kOk);
    REQUIRE(invoke({"place", "--synthetic", "--seed", "7", "--out", b.path.string()}).code == kOk);
    for (const char* name : {"coverage.csv", "placement.csv", "cost.csv"})
    {
        CHECK(slurp(a / name) == slurp(b / name));
        CHECK_FALSE(slurp(a / name).empty());
    }
    CHECK(slurp(a / "cost.csv") == "n_cores,n_pops,cost_3gpp,cost_encor,savings\n10,33,27500000,6600000,0.76\n");

    REQUIRE(invoke({"gen", "--seed", "7", "--out", g.path.string()}).code == kOk);
    CHECK(slurp(g / "counties.csv").rfind("# population_total=", 0) == 0);
    REQUIRE(invoke({"place", "--counties", g / "counties.csv", "--pops", g / "pops.csv", "--cdns", g / "cdns.csv",
                    "--out", f.path.string()})
                .code == kOk);
    for (const char* name : {"coverage.csv", "placement.csv"})
        CHECK(slurp(f / name) == slurp(a / name));
}

TEST_CASE("dataset problems exit 2 and cite the file")
{
    TempDir g;
    REQUIRE(invoke({"gen", "--seed", "2", "--out", g.path.string(), "--counties", "5"}).code == kOk);
    auto r = invoke({"place", "--counties", g / "missing.csv", "--pops", g / "pops.csv", "--cdns", g / "cdns.csv"});
    CHECK(r.code == kDataError);
    CHECK(r.err.find("missing.csv") != std::string::npos);

    std::string text = slurp(g / "counties.csv");
    // Break the population of the third data row (line 5 with the comment and header).
    std::istringstream in(text);
    std::string line, broken;
    for (int n = 1; std::getline(in, line); ++n)
        broken += (n == 5 ? line.substr(0, line.rfind(',')) + ",many" : line) + "\n";
    spit(g / "bad.csv", broken);
    r = invoke({"place", "--counties", g / "bad.csv", "--pops", g / "pops.csv", "--cdns", g / "cdns.csv"});
    CHECK(r.code == kDataError);
    CHECK(r.err.find("bad.csv:5:") != std::string::npos);
}

TEST_CASE("apps writes one row per app and policy, with and without a handover")
{
    TempDir d;
    spit(d / "small.cfg", "[apps]\nbulk_mb = 5\nbuffered_s = 40\nlive_s = 8\nhandover_s = 2\n");
    auto r = invoke({"apps", "--config", d / "small.cfg", "--format", "csv", "--out", d.path.string()});
    REQUIRE(r.code == kOk);
    CHECK(std::count(r.out.begin(), r.out.end(), '\n') == 9);
    CHECK(r.out.rfind("app,policy,handovers,throughput_mbps,retx_rate,stall_s,buffer_s,quality,fps,deadlocked\n", 0) ==
          0);
    CHECK(slurp(d / "apps.csv") == r.out);
    CHECK(invoke({"apps", "--config", d / "small.cfg", "--format", "csv"}).out == r.out);
}

TEST_CASE("load --check passes on a short default sweep")
{
    TempDir d;
    spit(d / "l.cfg", "[load]\nrates = 4, 64\nwindow_s = 30\n");
    auto r = invoke({"load", "--check", "--config", d / "l.cfg", "--format", "csv"});
    CHECK(r.code == kOk);
    CHECK(r.out.rfind("arch,rate_per_s,mean_ms,p95_ms,core_msgs_per_ho,saturated\n", 0) == 0);

    // Without a throttle worth the name LTE never reaches 0.9 utilization.
    spit(d / "fast.cfg", "[load]\nrates = 4, 64\nwindow_s = 10\ncore_service_rate = 100000\n");
    r = invoke({"load", "--check", "--config", d / "fast.cfg"});
    CHECK(r.code == kCheckFailed);
    CHECK(r.err.find("0.9") != std::string::npos);
}

TEST_CASE("the shipped default config restates the built-in defaults")
{
    const auto c = load_config(ENCOR_SOURCE_DIR "/config/default.cfg");
    const Config d;
    CHECK(c.seed == d.seed);
    CHECK(c.load.rates == d.load.rates);
    CHECK(c.load.core_service_rate == d.load.core_service_rate);
    CHECK(c.load.window == d.load.window);
    CHECK(c.load.warmup == d.load.warmup);
    CHECK(c.load.radio_latency == d.load.radio_latency);
    CHECK(c.mec.densities == d.mec.densities);
    CHECK(c.mec.grid.ue_count == d.mec.grid.ue_count);
    CHECK(c.mec.costs.inter == d.mec.costs.inter);
    CHECK(c.placement.budgets_km == d.placement.budgets_km);
    CHECK(c.placement.core_budgets == d.placement.core_budgets);
    CHECK(c.placement.costs.core_site_cost == d.placement.costs.core_site_cost);
    CHECK(c.placement.cost_pops == d.placement.cost_pops);
    CHECK(c.placement.synthetic.counties == d.placement.synthetic.counties);
    CHECK(c.apps.transport.path.moved_ttl == d.apps.transport.path.moved_ttl);
    CHECK(c.apps.transport.path.bottleneck_mbps == d.apps.transport.path.bottleneck_mbps);
    CHECK(c.apps.bulk_bytes == d.apps.bulk_bytes);
    CHECK(c.apps.handover_at == d.apps.handover_at);
}
