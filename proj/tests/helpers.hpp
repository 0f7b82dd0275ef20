#pragma once

#include <random>

#include <catch2/catch_amalgamated.hpp>

#include "crossfoam/forest.hpp"

namespace testutil {

using namespace crossfoam;

inline SubdivisionForest uniformForest(coord_t l_init, coord_t w, int depth, int max_depth = 32)
{
    SubdivisionForest f(l_init, w, max_depth);
    for (int d = 0; d < depth; d++)
    {
        std::vector<cell_idx> leaves;
        f.forEachLeaf([&](cell_idx i) { leaves.push_back(i); });
        for (cell_idx i : leaves)
            f.subdivide(i);
    }
    return f;
}

inline SubdivisionForest randomForest(coord_t l_init, coord_t w, int max_depth, unsigned seed, int ops)
{
    SubdivisionForest f(l_init, w, max_depth);
    std::mt19937 rng(seed);
    for (int k = 0; k < ops; k++)
    {
        std::vector<cell_idx> leaves;
        f.forEachLeaf([&](cell_idx i) {
            if (f.cell(i).depth < max_depth)
                leaves.push_back(i);
        });
        if (leaves.empty())
            break;
        f.subdivide(leaves[rng() % leaves.size()]);
    }
    return f;
}

/// full graph audit: symmetric links, leaves only, level difference <= 1
inline void auditLinks(const SubdivisionForest& f)
{
    f.forEachLeaf([&](cell_idx i) {
        const PrismCell& c = f.cell(i);
        for (int side = 0; side < 4; side++)
        {
            for (cell_idx n : c.links[side])
            {
                INFO("cell " << i << " side " << side << " -> " << n);
                REQUIRE(f.cell(n).isLeaf());
                REQUIRE(std::abs(f.cell(n).depth - c.depth) <= 1);
                const auto& back = f.cell(n).links[opposite(static_cast<Side>(side))];
                REQUIRE(std::find(back.begin(), back.end(), i) != back.end());
            }
        }
        REQUIRE(!c.links[kSideLeft].empty());
        REQUIRE(!c.links[kSideRight].empty());
    });
}

} // namespace testutil
