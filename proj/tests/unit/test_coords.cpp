// Copyright 2026 The hrtfxai Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <gtest/gtest.h>

#include <cmath>

#include "hrtfxai/coords.hpp"
#include "hrtfxai/error.hpp"
#include "hrtfxai/util.hpp"

using namespace hrtfxai;
using E = ElevationClass;

namespace {

E medial(double lateral, double polar) { return classify(InterauralPolar{lateral, polar}); }

}  // namespace

TEST(Classify, MedialSectorBoundariesAreUpperInclusive) {
  EXPECT_EQ(medial(0, -20.0), E::FrontDown);
  EXPECT_EQ(medial(0, -19.999), E::FrontLevel);
  EXPECT_EQ(medial(0, 20.0), E::FrontLevel);
  EXPECT_EQ(medial(0, 20.001), E::FrontUp);
  EXPECT_EQ(medial(0, 70.0), E::FrontUp);
  EXPECT_EQ(medial(0, 110.0), E::Up);
  EXPECT_EQ(medial(0, 160.0), E::BackUp);
  EXPECT_EQ(medial(0, 200.0), E::BackLevel);
  EXPECT_EQ(medial(0, 269.999), E::BackDown);
  EXPECT_EQ(medial(0, -89.0), E::FrontDown);
}

TEST(Classify, MinusNinetyIsBackDown) {
  EXPECT_EQ(medial(0, -90.0), E::BackDown);
  EXPECT_EQ(medial(0, 270.0), E::BackDown);
}

TEST(Classify, LateralRuleIsStrictAtSixty) {
  EXPECT_EQ(medial(60.0, 10.0), E::FrontLevel);
  EXPECT_EQ(medial(60.001, 10.0), E::LateralUp);
  EXPECT_EQ(medial(-75.0, 179.9), E::LateralUp);
  EXPECT_EQ(medial(-75.0, 180.0), E::LateralDown);
  EXPECT_EQ(medial(75.0, -0.1), E::LateralDown);
  EXPECT_EQ(medial(75.0, 0.0), E::LateralUp);
}

TEST(Coordinates, CardinalDirections) {
  auto front = vertical_to_interaural_deg(0, 0);
  EXPECT_NEAR(front.lateral_deg, 0.0, 1e-12);
  EXPECT_NEAR(front.polar_deg, 0.0, 1e-12);

  auto back = vertical_to_interaural_deg(180, 0);
  EXPECT_NEAR(back.lateral_deg, 0.0, 1e-12);
  EXPECT_NEAR(back.polar_deg, 180.0, 1e-12);

  auto top = vertical_to_interaural_deg(0, 90);
  EXPECT_NEAR(top.polar_deg, 90.0, 1e-12);

  auto below = vertical_to_interaural_deg(0, -45);
  EXPECT_NEAR(below.polar_deg, -45.0, 1e-12);

  auto left = vertical_to_interaural_deg(90, 0);
  EXPECT_NEAR(left.lateral_deg, -90.0, 1e-9);
  EXPECT_EQ(left.polar_deg, 0.0);  // pole convention

  auto right = vertical_to_interaural_deg(-90, 0);
  EXPECT_NEAR(right.lateral_deg, 90.0, 1e-9);
}

TEST(Coordinates, RoundTripOffPole) {
  Rng rng(11);
  for (int i = 0; i < 20000; ++i) {
    const double az = rng.uniform(-180.0, 180.0);
    const double el = rng.uniform(-89.0, 89.0);
    const auto ip = vertical_to_interaural_deg(az, el);
    if (std::abs(ip.lateral_deg) > 89.0) continue;
    const auto back = interaural_to_vertical(ip);
    ASSERT_NEAR(back.elevation_deg, el, 1e-9);
    ASSERT_NEAR(normalize_azimuth(back.azimuth_deg - az), 0.0, 1e-9);
  }
}

TEST(Coordinates, NormalizationRanges) {
  EXPECT_DOUBLE_EQ(normalize_azimuth(180.0), -180.0);
  EXPECT_DOUBLE_EQ(normalize_azimuth(540.0), -180.0);
  EXPECT_DOUBLE_EQ(normalize_azimuth(-190.0), 170.0);
  EXPECT_DOUBLE_EQ(normalize_polar(270.0), -90.0);
  EXPECT_DOUBLE_EQ(normalize_polar(-100.0), 260.0);
  EXPECT_DOUBLE_EQ(normalize_polar(45.0), 45.0);
}

TEST(Direction, FromVerticalLabels) {
  EXPECT_EQ(Direction::from_vertical({0, 0}).label, E::FrontLevel);
  EXPECT_EQ(Direction::from_vertical({180, -50}).label, E::BackDown);
  EXPECT_EQ(Direction::from_vertical({0, 90}).label, E::Up);
  EXPECT_EQ(Direction::from_vertical({90, 10}).label, E::LateralUp);
  EXPECT_EQ(Direction::from_vertical({-90, -10}).label, E::LateralDown);
}

TEST(Classes, NamesCodesAndParsing) {
  EXPECT_EQ(class_code(E::FrontDown), "FD");
  EXPECT_EQ(class_name(E::LateralDown), "LateralDown");
  EXPECT_EQ(parse_class("bu"), E::BackUp);
  EXPECT_EQ(parse_class("frontlevel"), E::FrontLevel);
  EXPECT_FALSE(parse_class("sideways").has_value());
  EXPECT_THROW(class_from_index(9), UsageError);
  for (int i = 0; i < kNumClasses; ++i) EXPECT_EQ(to_index(class_from_index(i)), i);
}

TEST(IpsiContra, LeftAndMedianKeepLeftAsIpsi) {
  std::vector<double> l = {1, 2}, r = {3, 4};
  auto [i0, c0] = ipsi_contra_swap(l, r, -30.0);
  EXPECT_EQ(i0, l);
  auto [i1, c1] = ipsi_contra_swap(l, r, 0.0);
  EXPECT_EQ(i1, l);
  auto [i2, c2] = ipsi_contra_swap(l, r, 30.0);
  EXPECT_EQ(i2, r);
  EXPECT_EQ(c2, l);
  std::vector<double> shorter = {1};
  EXPECT_THROW(ipsi_contra_swap(l, shorter, 0.0), DataError);
}
