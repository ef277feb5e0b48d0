#include "encor/placement.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

namespace encor::placement
{

namespace
{

constexpr double kInf = std::numeric_limits<double>::infinity();

double rad(double deg)
{
    return deg * std::numbers::pi / 180.0;
}

void require_nonempty(const std::vector<SitePoint>& v, const char* what)
{
    if (v.empty())
        throw std::invalid_argument(std::string("no ") + what + " sites");
}

/// d(pop, nearest cdn) per pop.
std::vector<double> pop_to_cdn(const std::vector<SitePoint>& pops, const std::vector<SitePoint>& cdns)
{
    std::vector<double> out;
    out.reserve(pops.size());
    for (const auto& p : pops)
    {
        double best = kInf;
        for (const auto& c : cdns)
            best = std::min(best, haversine(p.pos(), c.pos()));
        out.push_back(best);
    }
    return out;
}

/// Best core -> pop -> cdn tail per core.
std::vector<double> core_tails(const std::vector<SitePoint>& cores, const std::vector<SitePoint>& pops,
                               const std::vector<double>& pop_cdn)
{
    std::vector<double> out;
    out.reserve(cores.size());
    for (const auto& core : cores)
    {
        double best = kInf;
        for (std::size_t i = 0; i < pops.size(); ++i)
            best = std::min(best, haversine(core.pos(), pops[i].pos()) + pop_cdn[i]);
        out.push_back(best);
    }
    return out;
}

double via_sites(LatLon from, const std::vector<SitePoint>& sites, const std::vector<double>& tails)
{
    double best = kInf;
    for (std::size_t i = 0; i < sites.size(); ++i)
        best = std::min(best, haversine(from, sites[i].pos()) + tails[i]);
    return best;
}

std::string fmt(double v)
{
    char buf[64];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

std::vector<std::string> split_csv(const std::string& line)
{
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i)
    {
        char ch = line[i];
        if (quoted)
        {
            if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"')
                cur += '"', ++i;
            else if (ch == '"')
                quoted = false;
            else
                cur += ch;
        }
        else if (ch == '"')
            quoted = true;
        else if (ch == ',')
            out.push_back(std::move(cur)), cur.clear();
        else
            cur += ch;
    }
    out.push_back(std::move(cur));
    return out;
}

std::string quote(const std::string& s)
{
    if (s.find_first_of(",\"") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char ch : s)
    {
        if (ch == '"')
            out += '"';
        out += ch;
    }
    return out + "\"";
}

double parse_double(const std::string& s, const std::string& source, std::size_t line, const char* field)
{
    double v = 0.0;
    auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc{} || r.ptr != s.data() + s.size() || !std::isfinite(v))
        throw DataError(source, line, std::string("bad ") + field + " '" + s + "'");
    return v;
}

void check_coords(double lat, double lon, const std::string& source, std::size_t line)
{
    if (std::abs(lat) > 90.0 || std::abs(lon) > 180.0)
        throw DataError(source, line, "coordinates out of range");
}

/// Reads non-comment, non-blank lines; the first must equal `header`.
template <typename RowFn>
void read_rows(std::istream& in, const std::string& source, const std::string& header, std::size_t fields,
               RowFn row)
{
    std::string line;
    std::size_t n = 0;
    bool seen_header = false;
    while (std::getline(in, line))
    {
        ++n;
        if (!line.empty() && line.back() == '\r')
            line.pop_back();
        if (line.empty() || line[0] == '#')
            continue;
        if (!seen_header)
        {
            if (line != header)
                throw DataError(source, n, "expected header '" + header + "'");
            seen_header = true;
            continue;
        }
        auto cols = split_csv(line);
        if (cols.size() != fields)
            throw DataError(source, n,
                            "expected " + std::to_string(fields) + " fields, got " + std::to_string(cols.size()));
        row(cols, n);
    }
    if (!seen_header)
        throw DataError(source, n, "missing header '" + header + "'");
}

std::ifstream open_or_throw(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError(path, 0, "cannot open file");
    return in;
}

std::string padded_id(char prefix, std::size_t i, std::size_t count)
{
    auto width = std::max<std::size_t>(2, std::to_string(count).size());
    auto digits = std::to_string(i + 1);
    return std::string(1, prefix) + std::string(width > digits.size() ? width - digits.size() : 0, '0') + digits;
}

}  // namespace

double haversine(LatLon a, LatLon b)
{
    double dlat = rad(b.lat - a.lat);
    double dlon = rad(b.lon - a.lon);
    double s1 = std::sin(dlat / 2);
    double s2 = std::sin(dlon / 2);
    double h = s1 * s1 + std::cos(rad(a.lat)) * std::cos(rad(b.lat)) * s2 * s2;
    return 2.0 * kEarthRadiusKm * std::asin(std::min(1.0, std::sqrt(h)));
}

double county_distance_3gpp(const County& county, const std::vector<SitePoint>& cores,
                            const std::vector<SitePoint>& pops, const std::vector<SitePoint>& cdns)
{
    require_nonempty(cores, "core");
    require_nonempty(pops, "peering");
    require_nonempty(cdns, "CDN");
    auto tails = core_tails(cores, pops, pop_to_cdn(pops, cdns));
    return via_sites(county.pos(), cores, tails);
}

double county_distance_encor(const County& county, const std::vector<SitePoint>& pops,
                             const std::vector<SitePoint>& cdns)
{
    require_nonempty(pops, "peering");
    require_nonempty(cdns, "CDN");
    return via_sites(county.pos(), pops, pop_to_cdn(pops, cdns));
}

double coverage(const std::vector<County>& counties, const std::vector<double>& distances, double budget_km)
{
    if (distances.size() != counties.size())
        throw std::invalid_argument("one distance per county required");
    std::uint64_t total = 0, covered = 0;
    for (std::size_t i = 0; i < counties.size(); ++i)
    {
        total += counties[i].population;
        if (distances[i] <= budget_km)
            covered += counties[i].population;
    }
    return total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0;
}

double coverage_3gpp(const std::vector<County>& counties, const std::vector<SitePoint>& cores,
                     const std::vector<SitePoint>& pops, const std::vector<SitePoint>& cdns, double budget_km)
{
    require_nonempty(pops, "peering");
    require_nonempty(cdns, "CDN");
    if (cores.empty())
        return 0.0;
    auto tails = core_tails(cores, pops, pop_to_cdn(pops, cdns));
    std::vector<double> d;
    d.reserve(counties.size());
    for (const auto& c : counties)
        d.push_back(via_sites(c.pos(), cores, tails));
    return coverage(counties, d, budget_km);
}

double coverage_encor(const std::vector<County>& counties, const std::vector<SitePoint>& pops,
                      const std::vector<SitePoint>& cdns, double budget_km)
{
    require_nonempty(pops, "peering");
    require_nonempty(cdns, "CDN");
    auto tails = pop_to_cdn(pops, cdns);
    std::vector<double> d;
    d.reserve(counties.size());
    for (const auto& c : counties)
        d.push_back(via_sites(c.pos(), pops, tails));
    return coverage(counties, d, budget_km);
}

Deployment greedy_place(const std::vector<County>& counties, const std::vector<SitePoint>& pops,
                        const std::vector<SitePoint>& cdns, std::size_t n, double budget_km)
{
    if (n == 0)
        throw std::invalid_argument("core budget must be at least 1");
    require_nonempty(pops, "peering");
    require_nonempty(cdns, "CDN");
    Deployment out;
    out.budget_km = budget_km;
    out.core_budget = n;

    auto tails = core_tails(pops, pops, pop_to_cdn(pops, cdns));
    // reach[p][c]: core at PoP p alone brings county c within budget.
    std::vector<std::vector<bool>> reach(pops.size(), std::vector<bool>(counties.size()));
    for (std::size_t p = 0; p < pops.size(); ++p)
        for (std::size_t c = 0; c < counties.size(); ++c)
            reach[p][c] = haversine(counties[c].pos(), pops[p].pos()) + tails[p] <= budget_km;

    std::vector<bool> covered(counties.size(), false);
    std::vector<bool> chosen(pops.size(), false);
    while (out.cores.size() < n)
    {
        std::size_t best = pops.size();
        std::uint64_t best_gain = 0;
        for (std::size_t p = 0; p < pops.size(); ++p)
        {
            if (chosen[p])
                continue;
            std::uint64_t gain = 0;
            for (std::size_t c = 0; c < counties.size(); ++c)
                if (reach[p][c] && !covered[c])
                    gain += counties[c].population;
            if (gain > best_gain || (gain == best_gain && gain > 0 && best < pops.size() && pops[p].id < pops[best].id))
            {
                best = p;
                best_gain = gain;
            }
        }
        if (best == pops.size() || best_gain == 0)
            break;
        chosen[best] = true;
        for (std::size_t c = 0; c < counties.size(); ++c)
            if (reach[best][c])
                covered[c] = true;
        out.cores.push_back(pops[best].id);
        out.marginal.push_back(best_gain);
    }
    return out;
}

std::vector<SitePoint> deployed_sites(const Deployment& d, const std::vector<SitePoint>& pops)
{
    std::vector<SitePoint> out;
    for (const auto& id : d.cores)
    {
        auto it = std::find_if(pops.begin(), pops.end(), [&](const SitePoint& s) { return s.id == id; });
        if (it == pops.end())
            throw std::invalid_argument("deployment names unknown PoP " + id);
        out.push_back(*it);
    }
    return out;
}

CostComparison cost_compare(const CostModel& model, std::uint64_t n_cores, std::uint64_t n_pops,
                            bool routers_in_3gpp)
{
    if (model.core_site_cost == 0 || model.router_cost == 0)
        throw std::invalid_argument("costs must be positive");
    CostComparison out;
    out.cost_3gpp = n_cores * model.core_site_cost + (routers_in_3gpp ? n_pops * model.router_cost : 0);
    out.cost_encor = n_pops * model.router_cost;
    out.savings = out.cost_3gpp
                      ? 1.0 - static_cast<double>(out.cost_encor) / static_cast<double>(out.cost_3gpp)
                      : 0.0;
    return out;
}

DataError::DataError(std::string source, std::size_t line, const std::string& what)
    : std::runtime_error(source + ":" + std::to_string(line) + ": " + what), source_(std::move(source)),
      line_(line)
{
}

std::vector<County> parse_counties(std::istream& in, const std::string& source)
{
    std::vector<County> out;
    read_rows(in, source, "fips,name,lat,lon,population", 5, [&](const auto& cols, std::size_t line) {
        County c;
        c.fips = cols[0];
        c.name = cols[1];
        c.lat = parse_double(cols[2], source, line, "lat");
        c.lon = parse_double(cols[3], source, line, "lon");
        check_coords(c.lat, c.lon, source, line);
        const auto& p = cols[4];
        auto r = std::from_chars(p.data(), p.data() + p.size(), c.population);
        if (p.empty() || r.ec != std::errc{} || r.ptr != p.data() + p.size())
            throw DataError(source, line, "bad population '" + p + "'");
        out.push_back(std::move(c));
    });
    return out;
}

std::vector<SitePoint> parse_sites(std::istream& in, const std::string& source, SiteKind kind)
{
    std::vector<SitePoint> out;
    read_rows(in, source, "id,lat,lon", 3, [&](const auto& cols, std::size_t line) {
        SitePoint s;
        s.id = cols[0];
        s.kind = kind;
        if (s.id.empty())
            throw DataError(source, line, "empty id");
        s.lat = parse_double(cols[1], source, line, "lat");
        s.lon = parse_double(cols[2], source, line, "lon");
        check_coords(s.lat, s.lon, source, line);
        out.push_back(std::move(s));
    });
    return out;
}

std::vector<County> read_counties(const std::string& path)
{
    auto in = open_or_throw(path);
    return parse_counties(in, path);
}

std::vector<SitePoint> read_sites(const std::string& path, SiteKind kind)
{
    auto in = open_or_throw(path);
    return parse_sites(in, path, kind);
}

std::string counties_csv(const std::vector<County>& counties)
{
    std::uint64_t total = 0;
    for (const auto& c : counties)
        total += c.population;
    std::string out = "# population_total=" + std::to_string(total) + "\n";
    out += "fips,name,lat,lon,population\n";
    for (const auto& c : counties)
        out += quote(c.fips) + "," + quote(c.name) + "," + fmt(c.lat) + "," + fmt(c.lon) + "," +
               std::to_string(c.population) + "\n";
    return out;
}

std::string sites_csv(const std::vector<SitePoint>& sites)
{
    std::string out = "id,lat,lon\n";
    for (const auto& s : sites)
        out += quote(s.id) + "," + fmt(s.lat) + "," + fmt(s.lon) + "\n";
    return out;
}

Dataset generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec)
{
    if (spec.clusters == 0)
        throw std::invalid_argument("need at least one cluster");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ulat(spec.lat_min + 1.0, spec.lat_max - 1.0);
    std::uniform_real_distribution<double> ulon(spec.lon_min + 1.0, spec.lon_max - 1.0);
    std::lognormal_distribution<double> weight(0.0, 1.0);

    std::vector<LatLon> centers;
    std::vector<double> weights;
    for (std::size_t i = 0; i < spec.clusters; ++i)
    {
        centers.push_back({ulat(rng), ulon(rng)});
        weights.push_back(weight(rng));
    }
    std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
    auto clamp = [&](LatLon p) {
        return LatLon{std::clamp(p.lat, spec.lat_min, spec.lat_max), std::clamp(p.lon, spec.lon_min, spec.lon_max)};
    };

    Dataset d;
    std::normal_distribution<double> spread(0.0, 1.2);
    std::lognormal_distribution<double> size(0.0, 0.8);
    for (std::size_t i = 0; i < spec.counties; ++i)
    {
        std::size_t k = pick(rng);
        LatLon p = clamp({centers[k].lat + spread(rng), centers[k].lon + spread(rng)});
        County c;
        char fips[16];
        std::snprintf(fips, sizeof fips, "%05zu", 1001 + i);
        c.fips = fips;
        c.name = "County " + std::to_string(i + 1);
        c.lat = p.lat;
        c.lon = p.lon;
        c.population = 1000 + static_cast<std::uint64_t>(20000.0 * weights[k] * size(rng));
        d.counties.push_back(std::move(c));
    }
    std::normal_distribution<double> near(0.0, 0.6);
    auto sites = [&](std::size_t count, char prefix, SiteKind kind) {
        std::vector<SitePoint> out;
        for (std::size_t i = 0; i < count; ++i)
        {
            std::size_t k = pick(rng);
            LatLon p = clamp({centers[k].lat + near(rng), centers[k].lon + near(rng)});
            out.push_back(SitePoint{padded_id(prefix, i, count), kind, p.lat, p.lon});
        }
        return out;
    };
    d.pops = sites(spec.pops, 'P', SiteKind::PeeringPoP);
    d.cdns = sites(spec.cdns, 'C', SiteKind::CdnPoP);
    return d;
}

std::vector<CurvePoint> coverage_curve(const Dataset& data, const std::vector<double>& budgets_km,
                                       const std::vector<std::size_t>& core_budgets)
{
    std::vector<CurvePoint> out;
    for (double b : budgets_km)
    {
        double encor = coverage_encor(data.counties, data.pops, data.cdns, b);
        for (std::size_t n : core_budgets)
        {
            auto dep = greedy_place(data.counties, data.pops, data.cdns, n, b);
            double gpp = dep.cores.empty()
                             ? 0.0
                             : coverage_3gpp(data.counties, deployed_sites(dep, data.pops), data.pops, data.cdns, b);
            out.push_back({b, n, "3gpp", gpp});
            out.push_back({b, n, "encor", encor});
        }
    }
    return out;
}

std::string curve_csv(const std::vector<CurvePoint>& points)
{
    std::string out = "budget_km,core_budget,mode,coverage_fraction\n";
    for (const auto& p : points)
        out += fmt(p.budget_km) + "," + std::to_string(p.core_budget) + "," + p.mode + "," +
               fmt(p.coverage_fraction) + "\n";
    return out;
}

std::string placement_csv(const Deployment& d)
{
    std::string out = "rank,pop_id,marginal_population\n";
    for (std::size_t i = 0; i < d.cores.size(); ++i)
        out += std::to_string(i + 1) + "," + quote(d.cores[i]) + "," + std::to_string(d.marginal[i]) + "\n";
    return out;
}

}  // namespace encor::placement
