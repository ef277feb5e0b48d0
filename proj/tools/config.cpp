#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <functional>
#include <map>

namespace encor::cli
{

ConfigError::ConfigError(const std::string& where, std::string key, const std::string& what)
    : std::runtime_error(where + ": " + (key.empty() ? what : key + ": " + what)), key_(std::move(key))
{
}

namespace
{

struct BadValue
{
    std::string what;
};

std::string trim(std::string_view s)
{
    auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos)
        return {};
    auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

template <typename T>
T number(const std::string& v)
{
    T out{};
    auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc{} || p != v.data() + v.size())
        throw BadValue{"expected a number, got '" + v + "'"};
    return out;
}

template <typename T>
T positive(const std::string& v)
{
    T x = number<T>(v);
    if (!(x > T{}))
        throw BadValue{"must be positive, got '" + v + "'"};
    return x;
}

double non_negative(const std::string& v)
{
    double x = number<double>(v);
    if (x < 0.0)
        throw BadValue{"must not be negative, got '" + v + "'"};
    return x;
}

bool boolean(const std::string& v)
{
    if (v == "true" || v == "yes" || v == "1")
        return true;
    if (v == "false" || v == "no" || v == "0")
        return false;
    throw BadValue{"expected true or false, got '" + v + "'"};
}

template <typename T>
std::vector<T> list(const std::string& v)
{
    std::vector<T> out;
    std::size_t start = 0;
    while (start <= v.size())
    {
        auto comma = v.find(',', start);
        if (comma == std::string::npos)
            comma = v.size();
        out.push_back(positive<T>(trim(std::string_view(v).substr(start, comma - start))));
        start = comma + 1;
    }
    return out;
}

sim::SimTime ms(const std::string& v) { return sim::from_ms(non_negative(v)); }
sim::SimTime seconds(const std::string& v) { return sim::from_seconds(non_negative(v)); }

using Setter = std::function<void(Config&, const std::string&)>;

const std::map<std::string, Setter>& setters()
{
    static const std::map<std::string, Setter> table = {
        {"seed", [](Config& c, const std::string& v) { c.seed = number<std::uint64_t>(v); }},
        {"out", [](Config& c, const std::string& v) { c.out = v; }},

        {"load.ue_count", [](Config& c, const std::string& v) { c.load.ue_count = positive<std::size_t>(v); }},
        {"load.cell_count", [](Config& c, const std::string& v) { c.load.cell_count = positive<std::size_t>(v); }},
        {"load.cells_per_group",
         [](Config& c, const std::string& v) { c.load.cells_per_group = positive<std::size_t>(v); }},
        {"load.rates",
         [](Config& c, const std::string& v) {
             c.load.rates = list<double>(v);
             if (!std::is_sorted(c.load.rates.begin(), c.load.rates.end()))
                 throw BadValue{"rates must be ascending"};
         }},
        {"load.core_service_rate",
         [](Config& c, const std::string& v) { c.load.core_service_rate = positive<double>(v); }},
        {"load.radio_ms", [](Config& c, const std::string& v) { c.load.radio_latency = ms(v); }},
        {"load.backhaul_ms", [](Config& c, const std::string& v) { c.load.backhaul_latency = ms(v); }},
        {"load.window_s", [](Config& c, const std::string& v) { c.load.window = seconds(v); }},
        {"load.warmup_s", [](Config& c, const std::string& v) { c.load.warmup = seconds(v); }},

        {"mec.width", [](Config& c, const std::string& v) { c.mec.grid.width = positive<std::uint32_t>(v); }},
        {"mec.height", [](Config& c, const std::string& v) { c.mec.grid.height = positive<std::uint32_t>(v); }},
        {"mec.ue_count", [](Config& c, const std::string& v) { c.mec.grid.ue_count = positive<std::uint64_t>(v); }},
        {"mec.handovers_per_minute",
         [](Config& c, const std::string& v) { c.mec.grid.handovers_per_minute = positive<double>(v); }},
        {"mec.minutes", [](Config& c, const std::string& v) { c.mec.minutes = positive<double>(v); }},
        {"mec.densities", [](Config& c, const std::string& v) { c.mec.densities = list<std::uint32_t>(v); }},
        {"mec.c_intra", [](Config& c, const std::string& v) { c.mec.costs.intra = number<std::uint64_t>(v); }},
        {"mec.c_inter", [](Config& c, const std::string& v) { c.mec.costs.inter = number<std::uint64_t>(v); }},

        {"placement.counties", [](Config& c, const std::string& v) { c.placement.counties = v; }},
        {"placement.pops", [](Config& c, const std::string& v) { c.placement.pops = v; }},
        {"placement.cdns", [](Config& c, const std::string& v) { c.placement.cdns = v; }},
        {"placement.synthetic_counties",
         [](Config& c, const std::string& v) { c.placement.synthetic.counties = positive<std::size_t>(v); }},
        {"placement.synthetic_pops",
         [](Config& c, const std::string& v) { c.placement.synthetic.pops = positive<std::size_t>(v); }},
        {"placement.synthetic_cdns",
         [](Config& c, const std::string& v) { c.placement.synthetic.cdns = positive<std::size_t>(v); }},
        {"placement.synthetic_clusters",
         [](Config& c, const std::string& v) { c.placement.synthetic.clusters = positive<std::size_t>(v); }},
        {"placement.budgets_km", [](Config& c, const std::string& v) { c.placement.budgets_km = list<double>(v); }},
        {"placement.core_budgets",
         [](Config& c, const std::string& v) { c.placement.core_budgets = list<std::size_t>(v); }},
        {"placement.place_budget_km",
         [](Config& c, const std::string& v) { c.placement.place_budget_km = positive<double>(v); }},
        {"placement.place_cores",
         [](Config& c, const std::string& v) { c.placement.place_cores = positive<std::size_t>(v); }},
        {"placement.core_site_cost",
         [](Config& c, const std::string& v) { c.placement.costs.core_site_cost = positive<std::uint64_t>(v); }},
        {"placement.router_cost",
         [](Config& c, const std::string& v) { c.placement.costs.router_cost = positive<std::uint64_t>(v); }},
        {"placement.cost_cores",
         [](Config& c, const std::string& v) { c.placement.cost_cores = number<std::uint64_t>(v); }},
        {"placement.cost_pops", [](Config& c, const std::string& v) { c.placement.cost_pops = number<std::uint64_t>(v); }},

        {"apps.bandwidth_mbps",
         [](Config& c, const std::string& v) { c.apps.transport.path.bottleneck_mbps = positive<double>(v); }},
        {"apps.internet_ms", [](Config& c, const std::string& v) { c.apps.transport.path.internet_latency = ms(v); }},
        {"apps.radio_ms", [](Config& c, const std::string& v) { c.apps.transport.path.radio_latency = ms(v); }},
        {"apps.forwarding",
         [](Config& c, const std::string& v) { c.apps.transport.path.forwarding_enabled = boolean(v); }},
        {"apps.moved_ttl_ms", [](Config& c, const std::string& v) { c.apps.transport.path.moved_ttl = ms(v); }},
        {"apps.bulk_mb",
         [](Config& c, const std::string& v) {
             c.apps.bulk_bytes = static_cast<std::uint64_t>(positive<double>(v) * 1'000'000.0);
         }},
        {"apps.buffered_s", [](Config& c, const std::string& v) { c.apps.buffered_duration = seconds(v); }},
        {"apps.live_s", [](Config& c, const std::string& v) { c.apps.live_duration = seconds(v); }},
        {"apps.handover_s", [](Config& c, const std::string& v) { c.apps.handover_at = seconds(v); }},
        {"apps.align_to_chunk", [](Config& c, const std::string& v) { c.apps.align_to_chunk = boolean(v); }},
    };
    return table;
}

}  // namespace

std::vector<std::string> known_keys()
{
    std::vector<std::string> out;
    for (const auto& [k, _] : setters())
        out.push_back(k);
    return out;
}

Config parse_config(std::istream& in, const std::string& source)
{
    Config cfg;
    std::string section;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line))
    {
        ++lineno;
        const std::string where = source + ":" + std::to_string(lineno);
        auto hash = line.find('#');
        std::string text = trim(hash == std::string::npos ? line : line.substr(0, hash));
        if (text.empty())
            continue;
        if (text.front() == '[')
        {
            if (text.back() != ']')
                throw ConfigError(where, "", "unterminated section header");
            section = trim(std::string_view(text).substr(1, text.size() - 2));
            if (section != "load" && section != "mec" && section != "placement" && section != "apps")
                throw ConfigError(where, section, "unknown section");
            continue;
        }
        auto eq = text.find('=');
        if (eq == std::string::npos)
            throw ConfigError(where, "", "expected key = value");
        std::string key = trim(std::string_view(text).substr(0, eq));
        std::string value = trim(std::string_view(text).substr(eq + 1));
        std::string full = section.empty() ? key : section + "." + key;
        auto it = setters().find(full);
        if (it == setters().end())
            throw ConfigError(where, full, "unknown key");
        try
        {
            it->second(cfg, value);
        }
        catch (const BadValue& e)
        {
            throw ConfigError(where, full, e.what);
        }
    }
    return cfg;
}

Config load_config(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw ConfigError(path, "", "cannot open config file");
    return parse_config(in, path);
}

}  // namespace encor::cli
