#pragma once

// Grid mobility Monte Carlo: how control messaging grows as mobility
// anchors are deployed more densely.

#include <cstdint>
#include <string>
#include <vector>

namespace encor::mec
{

struct GridNetwork
{
    std::uint32_t width = 20;
    std::uint32_t height = 20;
    std::uint64_t ue_count = 8000;
    double handovers_per_minute = 5.0;

    std::uint32_t stations() const { return width * height; }
};

/// Side length of the square anchor blocks for `k` anchors; throws std::invalid_argument if k does not tile the grid.
std::uint32_t block_side(const GridNetwork& grid, std::uint32_t k);
/// Anchor serving station (x, y).
std::uint32_t anchor_of(const GridNetwork& grid, std::uint32_t k, std::uint32_t x, std::uint32_t y);

struct SweepPoint
{
    std::uint32_t k = 0;
    std::uint64_t handovers = 0;
    std::uint64_t inter = 0;
    std::uint64_t messages = 0;
    double ratio_vs_k1 = 0.0;
    double anchors_per_station = 0.0;
};

struct MessageCosts
{
    std::uint64_t intra = 15;
    std::uint64_t inter = 50;
};

/// Every UE hops to a uniformly chosen existing 4-neighbour at Poisson times.
/// Trajectories depend only on (grid, duration, seed), so runs that differ only in k see the same moves.
SweepPoint simulate_density(const GridNetwork& grid, std::uint32_t k, double duration_min,
                            std::uint64_t seed, MessageCosts costs = {});

/// Runs each density and fills ratio_vs_k1 against the k=1 point (run even if not listed).
std::vector<SweepPoint> sweep(const GridNetwork& grid, const std::vector<std::uint32_t>& densities,
                              double duration_min, std::uint64_t seed, MessageCosts costs = {});

/// Header `k,handovers,inter,messages,ratio_vs_k1,anchors_per_station`.
std::string sweep_csv(const std::vector<SweepPoint>& points);

}  // namespace encor::mec
