#pragma once

// Core placement over county centroids, peering PoPs and CDN PoPs:
// distances, population coverage, greedy siting and the cost comparison.

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace encor::placement
{

struct LatLon
{
    double lat = 0.0;
    double lon = 0.0;
};

struct County
{
    std::string fips;
    std::string name;
    double lat = 0.0;
    double lon = 0.0;
    std::uint64_t population = 0;

    LatLon pos() const { return {lat, lon}; }
    friend bool operator==(const County&, const County&) = default;
};

enum class SiteKind
{
    PeeringPoP,
    CdnPoP,
};

struct SitePoint
{
    std::string id;
    SiteKind kind = SiteKind::PeeringPoP;
    double lat = 0.0;
    double lon = 0.0;

    LatLon pos() const { return {lat, lon}; }
    friend bool operator==(const SitePoint&, const SitePoint&) = default;
};

struct Deployment
{
    /// Chosen PoP ids in pick order.
    std::vector<std::string> cores;
    double budget_km = 0.0;
    std::size_t core_budget = 0;
    /// Newly covered population contributed by each pick.
    std::vector<std::uint64_t> marginal;
};

struct CostModel
{
    /// Whole dollars.
    std::uint64_t core_site_cost = 2'750'000;
    std::uint64_t router_cost = 200'000;
};

struct CostComparison
{
    std::uint64_t cost_3gpp = 0;
    std::uint64_t cost_encor = 0;
    double savings = 0.0;
};

inline constexpr double kEarthRadiusKm = 6371.0;

double haversine(LatLon a, LatLon b);

/// min over (core, pop, cdn) of d(county, core) + d(core, pop) + d(pop, cdn).
double county_distance_3gpp(const County& county, const std::vector<SitePoint>& cores,
                            const std::vector<SitePoint>& pops, const std::vector<SitePoint>& cdns);
/// min over (pop, cdn) of d(county, pop) + d(pop, cdn).
double county_distance_encor(const County& county, const std::vector<SitePoint>& pops,
                             const std::vector<SitePoint>& cdns);

/// Fraction of total population whose distance is within the budget. Zero total population gives 0.
double coverage(const std::vector<County>& counties, const std::vector<double>& distances, double budget_km);
/// No cores covers nobody.
double coverage_3gpp(const std::vector<County>& counties, const std::vector<SitePoint>& cores,
                     const std::vector<SitePoint>& pops, const std::vector<SitePoint>& cdns,
                     double budget_km);
double coverage_encor(const std::vector<County>& counties, const std::vector<SitePoint>& pops,
                      const std::vector<SitePoint>& cdns, double budget_km);

/// Adds the PoP with the largest newly covered population, ties to the smaller id,
/// until n are chosen or nothing more can be gained.
Deployment greedy_place(const std::vector<County>& counties, const std::vector<SitePoint>& pops,
                        const std::vector<SitePoint>& cdns, std::size_t n, double budget_km);

/// The PoPs named by the deployment, in pick order.
std::vector<SitePoint> deployed_sites(const Deployment& d, const std::vector<SitePoint>& pops);

CostComparison cost_compare(const CostModel& model, std::uint64_t n_cores, std::uint64_t n_pops,
                            bool routers_in_3gpp = false);

// ---- datasets ----

struct Dataset
{
    std::vector<County> counties;
    std::vector<SitePoint> pops;
    std::vector<SitePoint> cdns;
};

/// Bad input file; carries the file and 1-based line.
class DataError : public std::runtime_error
{
  public:
    DataError(std::string source, std::size_t line, const std::string& what);
    const std::string& source() const { return source_; }
    std::size_t line() const { return line_; }

  private:
    std::string source_;
    std::size_t line_;
};

std::vector<County> parse_counties(std::istream& in, const std::string& source);
std::vector<SitePoint> parse_sites(std::istream& in, const std::string& source, SiteKind kind);
std::vector<County> read_counties(const std::string& path);
std::vector<SitePoint> read_sites(const std::string& path, SiteKind kind);

/// Population total goes in a leading `#` comment line.
std::string counties_csv(const std::vector<County>& counties);
std::string sites_csv(const std::vector<SitePoint>& sites);

struct SyntheticSpec
{
    std::size_t counties = 300;
    std::size_t pops = 8;
    std::size_t cdns = 6;
    std::size_t clusters = 12;
    double lat_min = 25.0, lat_max = 49.0;
    double lon_min = -124.0, lon_max = -67.0;
};

/// Population-weighted clusters inside the bounding box; PoPs and CDNs sit near populous clusters.
Dataset generate_synthetic(std::uint64_t seed, const SyntheticSpec& spec = {});

// ---- curves ----

struct CurvePoint
{
    double budget_km = 0.0;
    std::size_t core_budget = 0;
    std::string mode;
    double coverage_fraction = 0.0;
};

/// Greedy 3GPP coverage and EnCoR coverage for every (budget, core budget) pair.
std::vector<CurvePoint> coverage_curve(const Dataset& data, const std::vector<double>& budgets_km,
                                       const std::vector<std::size_t>& core_budgets);
/// Header `budget_km,core_budget,mode,coverage_fraction`.
std::string curve_csv(const std::vector<CurvePoint>& points);
/// Header `rank,pop_id,marginal_population`.
std::string placement_csv(const Deployment& d);

}  // namespace encor::placement
