#include "cli.hpp"

#include "config.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <unistd.h>

namespace encor::cli
{

namespace fs = std::filesystem;

void write_atomic(const std::string& path, const std::string& content)
{
    const fs::path target(path);
    if (target.has_parent_path())
        fs::create_directories(target.parent_path());
    fs::path tmp = target;
    tmp += ".tmp." + std::to_string(::getpid());
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f)
            throw std::runtime_error("cannot write " + tmp.string());
        f << content;
        f.flush();
        if (!f)
        {
            f.close();
            fs::remove(tmp);
            throw std::runtime_error("cannot write " + tmp.string());
        }
    }
    fs::rename(tmp, target);
}

std::string pretty_csv(const std::string& csv)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(csv);
    std::string line;
    while (std::getline(in, line))
    {
        if (line.empty() || line.front() == '#')
            continue;
        std::vector<std::string> cells;
        std::size_t start = 0;
        while (true)
        {
            auto comma = line.find(',', start);
            cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos)
                break;
            start = comma + 1;
        }
        rows.push_back(std::move(cells));
    }
    std::vector<std::size_t> width;
    for (const auto& r : rows)
    {
        if (width.size() < r.size())
            width.resize(r.size(), 0);
        for (std::size_t i = 0; i < r.size(); ++i)
            width[i] = std::max(width[i], r[i].size());
    }
    std::ostringstream os;
    for (const auto& r : rows)
    {
        for (std::size_t i = 0; i < r.size(); ++i)
        {
            if (i + 1 < r.size())
                os << std::left << std::setw(static_cast<int>(width[i])) << r[i] << "  ";
            else
                os << r[i];
        }
        os << '\n';
    }
    return os.str();
}

namespace
{

class CheckFailed : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

class UsageError : public std::runtime_error
{
  public:
    using std::runtime_error::runtime_error;
};

struct Common
{
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out;
    std::string format = "pretty";
};

struct Context
{
    Config cfg;
    std::string format;
    std::ostream& out;

    void emit(const std::string& csv) const { out << (format == "csv" ? csv : pretty_csv(csv)); }
    void save(const std::string& name, const std::string& csv) const
    {
        if (!cfg.out.empty())
            write_atomic((fs::path(cfg.out) / name).string(), csv);
    }
};

std::string num(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

// ---- table ----

int cmd_table(const Context& ctx, const std::string& mode)
{
    auto table = experiments::run_message_table();
    experiments::MessageTable shown;
    for (const auto& r : table.rows)
    {
        bool direct = r.label == "encor-direct";
        if (mode == "all" || r.label == "lte" || (mode == "direct") == direct)
            shown.rows.push_back(r);
    }
    const std::string csv = experiments::message_table_csv(shown);
    ctx.save("table.csv", csv);
    ctx.out << (ctx.format == "csv" ? csv : experiments::message_table_pretty(shown));
    if (!shown.matches())
        throw CheckFailed("message counts differ from the expected constants");
    return kOk;
}

// ---- load ----

void check_load(const experiments::LoadScenario& s, const experiments::LoadResult& res)
{
    using experiments::Architecture;
    const experiments::LoadRow* top = nullptr;
    for (double r : s.rates)
    {
        const auto& e = res.at(Architecture::Encor, r);
        const auto& l = res.at(Architecture::Lte, r);
        if (e.mean_ms > l.mean_ms)
            throw CheckFailed("EnCoR mean exceeds LTE mean at rate " + num(r));
        if ((e.completed && e.core_msgs_per_ho != 2.0) || (l.completed && l.core_msgs_per_ho != 15.0))
            throw CheckFailed("core messages per handover changed under load at rate " + num(r));
        if (l.utilization >= 0.9)
            top = &l;
    }
    if (!top)
        throw CheckFailed("LTE core utilization never reaches 0.9");
    double ratio = top->mean_ms / res.at(Architecture::Encor, top->rate_per_s).mean_ms;
    if (ratio < 2.0)
        throw CheckFailed("LTE/EnCoR mean ratio " + num(ratio) + " < 2 at rate " + num(top->rate_per_s));
}

int cmd_load(const Context& ctx, bool check)
{
    auto s = ctx.cfg.load;
    s.seed = ctx.cfg.seed;
    auto res = experiments::run_load_sweep(s);
    const std::string csv = experiments::load_csv(res);
    ctx.save("load.csv", csv);
    ctx.emit(csv);
    if (check)
        check_load(s, res);
    return kOk;
}

// ---- mec ----

void parse_grid(const std::string& text, mec::GridNetwork& grid)
{
    auto x = text.find('x');
    if (x == std::string::npos)
        throw UsageError("--grid expects WxH, got '" + text + "'");
    std::uint32_t w = 0, h = 0;
    auto a = std::from_chars(text.data(), text.data() + x, w);
    auto b = std::from_chars(text.data() + x + 1, text.data() + text.size(), h);
    if (a.ec != std::errc{} || a.ptr != text.data() + x || b.ec != std::errc{} ||
        b.ptr != text.data() + text.size() || w == 0 || h == 0)
        throw UsageError("--grid expects WxH, got '" + text + "'");
    grid.width = w;
    grid.height = h;
}

int cmd_mec(const Context& ctx, const std::string& grid_text, bool check)
{
    auto m = ctx.cfg.mec;
    if (!grid_text.empty())
        parse_grid(grid_text, m.grid);
    std::vector<std::uint32_t> densities;
    for (auto k : m.densities)
        if (k <= m.grid.stations())
            densities.push_back(k);
    std::vector<mec::SweepPoint> pts;
    try
    {
        pts = mec::sweep(m.grid, densities, m.minutes, ctx.cfg.seed, m.costs);
    }
    catch (const std::invalid_argument& e)
    {
        throw UsageError(std::string("mec.densities: ") + e.what());
    }
    const std::string csv = mec::sweep_csv(pts);
    ctx.save("mec.csv", csv);
    ctx.emit(csv);
    if (check)
    {
        for (std::size_t i = 0; i < pts.size(); ++i)
        {
            if (pts[i].k == 1 && pts[i].ratio_vs_k1 != 1.0)
                throw CheckFailed("ratio at k=1 is not 1");
            if (i > 0 && pts[i].k > pts[i - 1].k && pts[i].ratio_vs_k1 < pts[i - 1].ratio_vs_k1)
                throw CheckFailed("ratio decreases at k=" + std::to_string(pts[i].k));
            if (pts[i].k == m.grid.stations() && m.costs.intra > 0)
            {
                double want = static_cast<double>(m.costs.inter) / static_cast<double>(m.costs.intra);
                if (std::abs(pts[i].ratio_vs_k1 - want) > 0.05)
                    throw CheckFailed("ratio at one anchor per station is " + num(pts[i].ratio_vs_k1));
            }
        }
    }
    return kOk;
}

// ---- place ----

struct PlaceArgs
{
    bool synthetic = false;
    std::string counties, pops, cdns;
};

int cmd_place(const Context& ctx, const PlaceArgs& args)
{
    const auto& p = ctx.cfg.placement;
    placement::Dataset data;
    if (args.synthetic)
    {
        data = placement::generate_synthetic(ctx.cfg.seed, p.synthetic);
    }
    else
    {
        std::string c = args.counties.empty() ? p.counties : args.counties;
        std::string o = args.pops.empty() ? p.pops : args.pops;
        std::string d = args.cdns.empty() ? p.cdns : args.cdns;
        if (c.empty() || o.empty() || d.empty())
            throw UsageError("place needs --synthetic or counties, pops and cdns files");
        data.counties = placement::read_counties(c);
        data.pops = placement::read_sites(o, placement::SiteKind::PeeringPoP);
        data.cdns = placement::read_sites(d, placement::SiteKind::CdnPoP);
    }
    auto curve = placement::coverage_curve(data, p.budgets_km, p.core_budgets);
    auto dep = placement::greedy_place(data.counties, data.pops, data.cdns, p.place_cores, p.place_budget_km);
    auto cost = placement::cost_compare(p.costs, p.cost_cores, p.cost_pops);

    const std::string curve_text = placement::curve_csv(curve);
    std::string cost_text = "n_cores,n_pops,cost_3gpp,cost_encor,savings\n" + std::to_string(p.cost_cores) + "," +
                            std::to_string(p.cost_pops) + "," + std::to_string(cost.cost_3gpp) + "," +
                            std::to_string(cost.cost_encor) + "," + num(cost.savings) + "\n";
    ctx.save("coverage.csv", curve_text);
    ctx.save("placement.csv", placement::placement_csv(dep));
    ctx.save("cost.csv", cost_text);
    ctx.emit(curve_text);
    return kOk;
}

// ---- apps ----

int cmd_apps(const Context& ctx)
{
    const auto& a = ctx.cfg.apps;
    std::string csv = transport::AppMetrics::csv_header() + "\n";
    for (int with_ho = 0; with_ho <= 1; ++with_ho)
    {
        std::vector<sim::SimTime> hos;
        if (with_ho)
            hos.push_back(a.handover_at);

        transport::BulkOptions bulk;
        bulk.file_bytes = a.bulk_bytes;
        bulk.handovers = hos;
        bulk.seed = ctx.cfg.seed;
        csv += transport::run_bulk(a.transport, bulk).csv_row() + "\n";

        transport::BufferedOptions buf;
        buf.duration = a.buffered_duration;
        buf.handovers = hos;
        buf.align_to_chunk = a.align_to_chunk;
        buf.seed = ctx.cfg.seed;
        csv += transport::run_buffered(a.transport, buf).csv_row() + "\n";

        for (auto mode : {transport::PolicyMode::PassiveOnly, transport::PolicyMode::PingOnIdle})
        {
            transport::LiveOptions live;
            live.duration = a.live_duration;
            live.handovers = hos;
            live.policy.mode = mode;
            live.seed = ctx.cfg.seed;
            csv += transport::run_live(a.transport, live).csv_row() + "\n";
        }
    }
    ctx.save("apps.csv", csv);
    ctx.emit(csv);
    return kOk;
}

// ---- gen ----

int cmd_gen(const Context& ctx, std::optional<std::size_t> counties, std::optional<std::size_t> pops,
            std::optional<std::size_t> cdns)
{
    auto spec = ctx.cfg.placement.synthetic;
    if (counties)
        spec.counties = *counties;
    if (pops)
        spec.pops = *pops;
    if (cdns)
        spec.cdns = *cdns;
    auto data = placement::generate_synthetic(ctx.cfg.seed, spec);
    const fs::path dir = ctx.cfg.out.empty() ? fs::path(".") : fs::path(ctx.cfg.out);
    const std::vector<std::pair<std::string, std::string>> files = {
        {"counties.csv", placement::counties_csv(data.counties)},
        {"pops.csv", placement::sites_csv(data.pops)},
        {"cdns.csv", placement::sites_csv(data.cdns)},
    };
    std::string listing = "file,rows\n";
    for (const auto& [name, text] : files)
    {
        write_atomic((dir / name).string(), text);
        auto rows = std::count(text.begin(), text.end(), '\n') - 1 - (text.front() == '#' ? 1 : 0);
        listing += (dir / name).string() + "," + std::to_string(rows) + "\n";
    }
    ctx.emit(listing);
    return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err)
{
    CLI::App app{"Mobility core experiments", "encor"};
    app.require_subcommand(1);
    app.fallthrough();

    Common common;
    app.add_option("--config", common.config_path, "Configuration file");
    app.add_option("--seed", common.seed, "Root seed, overrides the config");
    app.add_option("--out", common.out, "Directory for CSV outputs");
    app.add_option("--format", common.format, "Standard output format")->check(CLI::IsMember({"csv", "pretty"}));

    std::string mode = "all";
    auto* table = app.add_subcommand("table", "Control messages per handover");
    table->add_option("--mode", mode, "Which EnCoR rows to show")
        ->check(CLI::IsMember({"all", "core-assisted", "direct"}));

    bool check = false;
    auto* load = app.add_subcommand("load", "Handover completion under core load");
    load->add_flag("--check", check, "Exit 3 unless the load properties hold");

    std::string grid;
    auto* mecc = app.add_subcommand("mec", "Control messaging versus anchor density");
    mecc->add_option("--grid", grid, "Grid size as WxH");
    mecc->add_flag("--check", check, "Exit 3 unless the ratio properties hold");

    PlaceArgs place_args;
    auto* place = app.add_subcommand("place", "Coverage curves, greedy placement and costs");
    place->add_flag("--synthetic", place_args.synthetic, "Use a generated dataset");
    place->add_option("--counties", place_args.counties, "County centroids CSV");
    place->add_option("--pops", place_args.pops, "Peering PoP CSV");
    place->add_option("--cdns", place_args.cdns, "CDN PoP CSV");

    auto* apps = app.add_subcommand("apps", "Transport behaviour of bulk, buffered and live apps");

    std::optional<std::size_t> gen_counties, gen_pops, gen_cdns;
    auto* gen = app.add_subcommand("gen", "Write a synthetic placement dataset");
    gen->add_option("--counties", gen_counties, "Number of counties");
    gen->add_option("--pops", gen_pops, "Number of peering PoPs");
    gen->add_option("--cdns", gen_cdns, "Number of CDN PoPs");

    try
    {
        app.parse(argc, argv);
    }
    catch (const CLI::CallForHelp&)
    {
        out << app.help();
        return kOk;
    }
    catch (const CLI::CallForAllHelp&)
    {
        out << app.help("", CLI::AppFormatMode::All);
        return kOk;
    }
    catch (const CLI::ParseError& e)
    {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }

    try
    {
        Context ctx{common.config_path.empty() ? Config{} : load_config(common.config_path), common.format, out};
        if (common.seed)
            ctx.cfg.seed = *common.seed;
        if (!common.out.empty())
            ctx.cfg.out = common.out;

        if (table->parsed())
            return cmd_table(ctx, mode);
        if (load->parsed())
            return cmd_load(ctx, check);
        if (mecc->parsed())
            return cmd_mec(ctx, grid, check);
        if (place->parsed())
            return cmd_place(ctx, place_args);
        if (apps->parsed())
            return cmd_apps(ctx);
        if (gen->parsed())
            return cmd_gen(ctx, gen_counties, gen_pops, gen_cdns);
        return kUsage;
    }
    catch (const ConfigError& e)
    {
        err << "config error: " << e.what() << "\n";
        return kUsage;
    }
    catch (const UsageError& e)
    {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }
    catch (const placement::DataError& e)
    {
        err << "data error: " << e.what() << "\n";
        return kDataError;
    }
    catch (const CheckFailed& e)
    {
        err << "check failed: " << e.what() << "\n";
        return kCheckFailed;
    }
    catch (const std::invalid_argument& e)
    {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    }
    catch (const std::exception& e)
    {
        err << "error: " << e.what() << "\n";
        return kDataError;
    }
}

}  // namespace encor::cli
