#include <doctest.h>

#include "encor/mec_sweep.hpp"

#include <cmath>
#include <stdexcept>

using namespace encor::mec;

namespace
{

// Uniform-neighbour walk has a degree-proportional stationary law, so each directed
// edge is traversed equally often: inter fraction = crossing directed edges / all directed edges.
double enumerate_inter_fraction(const GridNetwork& g, std::uint32_t k)
{
    std::uint64_t all = 0, crossing = 0;
    for (std::uint32_t y = 0; y < g.height; ++y)
    {
        for (std::uint32_t x = 0; x < g.width; ++x)
        {
            const int dx[4] = {-1, 1, 0, 0};
            const int dy[4] = {0, 0, -1, 1};
            for (int d = 0; d < 4; ++d)
            {
                int nx = static_cast<int>(x) + dx[d];
                int ny = static_cast<int>(y) + dy[d];
                if (nx < 0 || ny < 0 || nx >= static_cast<int>(g.width) || ny >= static_cast<int>(g.height))
                    continue;
                ++all;
                if (anchor_of(g, k, x, y) != anchor_of(g, k, nx, ny))
                    ++crossing;
            }
        }
    }
    return static_cast<double>(crossing) / all;
}

}  // namespace

TEST_CASE("anchor blocks tile the grid")
{
    GridNetwork g;
    CHECK(block_side(g, 1) == 20);
    CHECK(block_side(g, 4) == 10);
    CHECK(block_side(g, 16) == 5);
    CHECK(block_side(g, 25) == 4);
    CHECK(block_side(g, 100) == 2);
    CHECK(block_side(g, 400) == 1);
    CHECK_THROWS_AS(block_side(g, 3), std::invalid_argument);
    CHECK_THROWS_AS(block_side(g, 9), std::invalid_argument);
    CHECK_THROWS_AS(simulate_density(g, 0, 1.0, 1), std::invalid_argument);

    for (std::uint32_t k : {1u, 4u, 16u, 25u, 100u, 400u})
    {
        std::vector<int> served(k, 0);
        for (std::uint32_t y = 0; y < g.height; ++y)
            for (std::uint32_t x = 0; x < g.width; ++x)
                ++served.at(anchor_of(g, k, x, y));
        for (int s : served)
            CHECK(s == static_cast<int>(g.stations() / k));
    }
}

TEST_CASE("single anchor sees no inter-anchor handovers; one per station sees only those")
{
    GridNetwork g;
    g.ue_count = 500;
    auto one = simulate_density(g, 1, 10.0, 3);
    CHECK(one.inter == 0);
    CHECK(one.messages == one.handovers * 15);
    auto all = simulate_density(g, 400, 10.0, 3);
    CHECK(all.inter == all.handovers);
    CHECK(all.handovers == one.handovers);
}

TEST_CASE("4x4 grid with 4 anchors matches directed-edge enumeration")
{
    GridNetwork g{4, 4, 20000, 5.0};
    double oracle = enumerate_inter_fraction(g, 4);
    CHECK(oracle == doctest::Approx(1.0 / 3.0));
    auto p = simulate_density(g, 4, 20.0, 11);
    double f = static_cast<double>(p.inter) / p.handovers;
    double sigma = std::sqrt(oracle * (1 - oracle) / p.handovers);
    // Start positions are uniform, not stationary; the walk mixes within a few moves.
    CHECK(std::abs(f - oracle) < 4 * sigma + 0.005);
}

TEST_CASE("inter fraction tracks the enumeration on the default grid")
{
    GridNetwork g;
    g.ue_count = 4000;
    for (std::uint32_t k : {4u, 16u, 25u, 100u})
    {
        auto p = simulate_density(g, k, 10.0, 5);
        double f = static_cast<double>(p.inter) / p.handovers;
        CHECK(f == doctest::Approx(enumerate_inter_fraction(g, k)).epsilon(0.03));
    }
}

TEST_CASE("handover totals sit within Poisson bounds")
{
    GridNetwork g;
    auto p = simulate_density(g, 1, 10.0, 21);
    double mean = static_cast<double>(g.ue_count) * g.handovers_per_minute * 10.0;
    CHECK(std::abs(static_cast<double>(p.handovers) - mean) <= 3 * std::sqrt(mean));
}

TEST_CASE("sweep ratios: 1 at k=1, nondecreasing, c_inter/c_intra at full density")
{
    GridNetwork g;
    auto pts = sweep(g, {1, 4, 16, 25, 100, 400}, 10.0, 42);
    REQUIRE(pts.size() == 6);
    CHECK(pts.front().ratio_vs_k1 == 1.0);
    for (std::size_t i = 1; i < pts.size(); ++i)
        CHECK(pts[i].ratio_vs_k1 >= pts[i - 1].ratio_vs_k1);
    CHECK(pts.back().ratio_vs_k1 == doctest::Approx(50.0 / 15.0));
    CHECK(pts.back().anchors_per_station == 1.0);

    auto again = sweep(g, {1, 4, 16, 25, 100, 400}, 10.0, 42);
    CHECK(sweep_csv(pts) == sweep_csv(again));
    CHECK(sweep_csv(pts).rfind("k,handovers,inter,messages,ratio_vs_k1,anchors_per_station\n", 0) == 0);
}

TEST_CASE("sweep without k=1 still normalises against it")
{
    GridNetwork g;
    g.ue_count = 300;
    auto pts = sweep(g, {400}, 5.0, 8);
    CHECK(pts[0].ratio_vs_k1 == doctest::Approx(50.0 / 15.0));
}
