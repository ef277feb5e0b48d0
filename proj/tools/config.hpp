#pragma once

// Run configuration: flat key = value lines grouped under [section] headers.
// Keys before the first header belong to the top level. Unknown sections or
// keys are errors.

#include "encor/experiments.hpp"
#include "encor/mec_sweep.hpp"
#include "encor/placement.hpp"
#include "encor/transport.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace encor::cli
{

/// Bad configuration; `key()` is the offending `section.key`, or empty for syntax errors.
class ConfigError : public std::runtime_error
{
  public:
    ConfigError(const std::string& where, std::string key, const std::string& what);
    const std::string& key() const { return key_; }

  private:
    std::string key_;
};

struct MecSettings
{
    mec::GridNetwork grid;
    std::vector<std::uint32_t> densities{1, 4, 16, 25, 100, 400};
    double minutes = 10.0;
    mec::MessageCosts costs;
};

struct PlacementSettings
{
    std::string counties;
    std::string pops;
    std::string cdns;
    placement::SyntheticSpec synthetic;
    std::vector<double> budgets_km{250, 500, 750, 1000, 1500, 2000};
    std::vector<std::size_t> core_budgets{1, 2, 4, 8};
    /// Deployment written to placement.csv.
    double place_budget_km = 1000.0;
    std::size_t place_cores = 4;
    placement::CostModel costs;
    std::uint64_t cost_cores = 10;
    std::uint64_t cost_pops = 33;
};

struct AppsSettings
{
    transport::TransportConfig transport;
    std::uint64_t bulk_bytes = 100'000'000;
    sim::SimTime buffered_duration = sim::from_seconds(120);
    sim::SimTime live_duration = sim::from_seconds(30);
    sim::SimTime handover_at = sim::from_seconds(6);
    bool align_to_chunk = true;
};

struct Config
{
    std::uint64_t seed = 1;
    std::string out;
    experiments::LoadScenario load;
    MecSettings mec;
    PlacementSettings placement;
    AppsSettings apps;
};

Config parse_config(std::istream& in, const std::string& source);
/// Throws ConfigError naming the path when the file cannot be opened.
Config load_config(const std::string& path);

/// Every accepted `section.key`, top-level keys without a prefix.
std::vector<std::string> known_keys();

}  // namespace encor::cli
