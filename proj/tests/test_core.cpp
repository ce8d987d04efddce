// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <cmath>
#include <set>
#include <stdexcept>

#include "bbpose/core.hpp"

using namespace bbpose;

TEST_CASE("canonical skeleton is a 14-joint, 13-limb tree rooted at the neck")
{
    const Skeleton s = canonical_skeleton();
    CHECK(s.joint_names.size() == 14);
    CHECK(s.limbs.size() == 13);
    CHECK(s.root == kNeck);
    CHECK(s.limbs[0].parent == kNeck);
    CHECK(is_depth_first_tree(s));

    std::multiset<int> children;
    for (const Limb& l : s.limbs) children.insert(l.child);
    for (int j = 0; j < kNumJoints; ++j) CHECK(children.count(j) == (j == kNeck ? 0u : 1u));
    CHECK(s.incoming_limb(kNeck) == -1);
    for (int c = 0; c < kNumLimbs; ++c) CHECK(s.incoming_limb(s.limbs[c].child) == c);
}

TEST_CASE("limb order reaches every parent before its limbs")
{
    Skeleton s = canonical_skeleton();
    std::swap(s.limbs[1], s.limbs[2]);  // elbow limb before the shoulder limb
    CHECK_FALSE(is_depth_first_tree(s));
}

TEST_CASE("bounding box geometry")
{
    const BoundingBox b{0, 0, 10, 20};
    CHECK(b.width() == 10);
    CHECK(b.height() == 20);
    CHECK(b.area() == 200);
    CHECK(b.contains({10, 20}));
    CHECK(b.contains({0, 0}));
    CHECK_FALSE(b.contains({10.01, 5}));
    CHECK(b.valid());
    CHECK_FALSE(BoundingBox{5, 0, 5, 1}.valid());
    CHECK_FALSE(BoundingBox{0, 0, std::nan(""), 1}.valid());
}

TEST_CASE("field grid covers the image at its stride")
{
    const FieldGrid g = FieldGrid::for_image(101, 50, 2, 4);
    CHECK(g.width() == 26);
    CHECK(g.height() == 13);
    CHECK(g.channels() == 2);
    CHECK(g.values().size() == 26u * 13u * 2u);
    CHECK(g.cell_center(0, 0) == Point2{2, 2});
    CHECK(g.cell_center(3, 1) == Point2{14, 6});
    CHECK_THROWS_AS(FieldGrid(2, 2, 3, 1), std::invalid_argument);
    CHECK_THROWS_AS(FieldGrid(2, 2, 1, 0), std::invalid_argument);
    CHECK_THROWS_AS(FieldGrid(2, 2, 1, 1, std::vector<float>(3)), std::invalid_argument);
}

TEST_CASE("bilinear sampling")
{
    SUBCASE("constant grid returns the constant everywhere")
    {
        FieldGrid g(5, 4, 1, 1, std::vector<float>(20, 0.25f));
        for (Point2 p : {Point2{0, 0}, Point2{2.3, 1.7}, Point2{4.9, 3.9}, Point2{-3, 40}}) {
            CHECK(sample_bilinear(g, p)[0] == doctest::Approx(0.25));
        }
    }
    SUBCASE("cell centers return the cell value")
    {
        FieldGrid g(3, 3, 1, 2);
        for (int i = 0; i < 9; ++i) g.values()[i] = static_cast<float>(i);
        for (int y = 0; y < 3; ++y) {
            for (int x = 0; x < 3; ++x) CHECK(sample_bilinear(g, g.cell_center(x, y))[0] == g.at(x, y));
        }
    }
    SUBCASE("midway between values 0 and 1")
    {
        FieldGrid g(2, 1, 1, 1, {0.0f, 1.0f});
        CHECK(sample_bilinear(g, {1.0, 0.5})[0] == doctest::Approx(0.5));
    }
    SUBCASE("vector grid samples both channels")
    {
        FieldGrid g(2, 1, 2, 1, {0.0f, 1.0f, 1.0f, 0.0f});
        const auto v = sample_bilinear(g, {1.0, 0.5});
        CHECK(v[0] == doctest::Approx(0.5));
        CHECK(v[1] == doctest::Approx(0.5));
    }
}

TEST_CASE("field map shape check")
{
    FieldMaps maps;
    for (int j = 0; j < kNumJoints; ++j) maps.confidence.emplace_back(4, 4, 1, 1);
    for (int c = 0; c < kNumLimbs; ++c) maps.direction.emplace_back(4, 4, 2, 1);
    CHECK_NOTHROW(check_field_maps(maps));
    maps.direction.back() = FieldGrid(4, 5, 2, 1);
    CHECK_THROWS_AS(check_field_maps(maps), std::invalid_argument);
    maps.direction.pop_back();
    CHECK_THROWS_AS(check_field_maps(maps), std::invalid_argument);
}

TEST_CASE("pose bounds and counts")
{
    Pose p;
    CHECK(p.joint_count() == 0);
    CHECK_FALSE(p.joint_bounds().has_value());
    p.joints[kNeck] = PoseJoint{{5, 7}};
    p.joints[kLeftAnkle] = PoseJoint{{1, 30}};
    CHECK(p.joint_count() == 2);
    CHECK(*p.joint_bounds() == BoundingBox{1, 7, 5, 30});
}
