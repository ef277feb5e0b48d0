#include "encor/mec_sweep.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <random>
#include <stdexcept>

namespace encor::mec
{

std::uint32_t block_side(const GridNetwork& grid, std::uint32_t k)
{
    if (k == 0 || grid.width == 0 || grid.height == 0)
        throw std::invalid_argument("anchor count must be positive");
    for (std::uint32_t b = 1; b <= std::min(grid.width, grid.height); ++b)
    {
        if (grid.width % b || grid.height % b)
            continue;
        if (static_cast<std::uint64_t>(grid.width / b) * (grid.height / b) == k)
            return b;
    }
    throw std::invalid_argument("k=" + std::to_string(k) + " does not tile a " +
                                std::to_string(grid.width) + "x" + std::to_string(grid.height) +
                                " grid into equal square blocks");
}

std::uint32_t anchor_of(const GridNetwork& grid, std::uint32_t k, std::uint32_t x, std::uint32_t y)
{
    std::uint32_t b = block_side(grid, k);
    return (y / b) * (grid.width / b) + x / b;
}

SweepPoint simulate_density(const GridNetwork& grid, std::uint32_t k, double duration_min,
                            std::uint64_t seed, MessageCosts costs)
{
    std::uint32_t b = block_side(grid, k);
    std::uint32_t blocks_x = grid.width / b;
    SweepPoint out;
    out.k = k;
    out.anchors_per_station = static_cast<double>(k) / grid.stations();
    if (grid.handovers_per_minute <= 0.0 || duration_min <= 0.0)
        return out;

    std::mt19937_64 rng(seed);
    std::exponential_distribution<double> gap(grid.handovers_per_minute);
    for (std::uint64_t ue = 0; ue < grid.ue_count; ++ue)
    {
        // Even spread: station ue mod (W*H).
        auto start = static_cast<std::uint32_t>(ue % grid.stations());
        std::uint32_t x = start % grid.width;
        std::uint32_t y = start / grid.width;
        double t = gap(rng);
        while (t < duration_min)
        {
            std::uint32_t nx[4], ny[4];
            int n = 0;
            if (x > 0)
                nx[n] = x - 1, ny[n++] = y;
            if (x + 1 < grid.width)
                nx[n] = x + 1, ny[n++] = y;
            if (y > 0)
                nx[n] = x, ny[n++] = y - 1;
            if (y + 1 < grid.height)
                nx[n] = x, ny[n++] = y + 1;
            if (n == 0)
                break;
            int pick = static_cast<int>(std::uniform_int_distribution<int>(0, n - 1)(rng));
            std::uint32_t a0 = (y / b) * blocks_x + x / b;
            x = nx[pick];
            y = ny[pick];
            std::uint32_t a1 = (y / b) * blocks_x + x / b;
            ++out.handovers;
            if (a0 != a1)
                ++out.inter;
            t += gap(rng);
        }
    }
    out.messages = (out.handovers - out.inter) * costs.intra + out.inter * costs.inter;
    return out;
}

std::vector<SweepPoint> sweep(const GridNetwork& grid, const std::vector<std::uint32_t>& densities,
                              double duration_min, std::uint64_t seed, MessageCosts costs)
{
    std::vector<SweepPoint> points;
    std::uint64_t base_messages = 0;
    for (auto k : densities)
    {
        points.push_back(simulate_density(grid, k, duration_min, seed, costs));
        if (k == 1)
            base_messages = points.back().messages;
    }
    if (std::find(densities.begin(), densities.end(), 1u) == densities.end())
        base_messages = simulate_density(grid, 1, duration_min, seed, costs).messages;
    for (auto& p : points)
        p.ratio_vs_k1 = base_messages ? static_cast<double>(p.messages) / base_messages : 0.0;
    return points;
}

std::string sweep_csv(const std::vector<SweepPoint>& points)
{
    std::string out = "k,handovers,inter,messages,ratio_vs_k1,anchors_per_station\n";
    char buf[160];
    for (const auto& p : points)
    {
        std::snprintf(buf, sizeof buf, "%u,%llu,%llu,%llu,%.6f,%.6f\n", p.k,
                      static_cast<unsigned long long>(p.handovers), static_cast<unsigned long long>(p.inter),
                      static_cast<unsigned long long>(p.messages), p.ratio_vs_k1, p.anchors_per_station);
        out += buf;
    }
    return out;
}

}  // namespace encor::mec
