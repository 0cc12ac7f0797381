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

#include "hrtfxai/coords.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <numbers>
#include <string>

#include "hrtfxai/error.hpp"

namespace hrtfxai {

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

// Below this the polar angle is geometrically undefined.
constexpr double kPoleRadius = 1e-12;

struct ClassInfo {
  ElevationClass cls;
  std::string_view name;
  std::string_view code;
};

constexpr std::array<ClassInfo, kNumClasses> kClassInfo = {{
    {ElevationClass::FrontDown, "FrontDown", "FD"},
    {ElevationClass::FrontLevel, "FrontLevel", "FL"},
    {ElevationClass::FrontUp, "FrontUp", "FU"},
    {ElevationClass::Up, "Up", "UP"},
    {ElevationClass::BackUp, "BackUp", "BU"},
    {ElevationClass::BackLevel, "BackLevel", "BL"},
    {ElevationClass::BackDown, "BackDown", "BD"},
    {ElevationClass::LateralUp, "LateralUp", "LU"},
    {ElevationClass::LateralDown, "LateralDown", "LD"},
}};

// Upper (inclusive) polar bound of each medial sector, in polar order.
constexpr std::array<std::pair<double, ElevationClass>, 7> kMedialUpper = {{
    {-20.0, ElevationClass::FrontDown},
    {20.0, ElevationClass::FrontLevel},
    {70.0, ElevationClass::FrontUp},
    {110.0, ElevationClass::Up},
    {160.0, ElevationClass::BackUp},
    {200.0, ElevationClass::BackLevel},
    {270.0, ElevationClass::BackDown},
}};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

}  // namespace

ElevationClass class_from_index(int index) {
  if (index < 0 || index >= kNumClasses) {
    throw UsageError("class index out of range: " + std::to_string(index));
  }
  return static_cast<ElevationClass>(index);
}

std::string_view class_name(ElevationClass c) { return kClassInfo[to_index(c)].name; }
std::string_view class_code(ElevationClass c) { return kClassInfo[to_index(c)].code; }

std::optional<ElevationClass> parse_class(std::string_view text) {
  for (const auto& info : kClassInfo) {
    if (iequals(text, info.name) || iequals(text, info.code)) return info.cls;
  }
  return std::nullopt;
}

double normalize_azimuth(double deg) {
  double a = std::fmod(deg + 180.0, 360.0);
  if (a < 0.0) a += 360.0;
  a -= 180.0;
  return a >= 180.0 ? a - 360.0 : a;
}

double normalize_polar(double deg) {
  double p = std::fmod(deg + 90.0, 360.0);
  if (p < 0.0) p += 360.0;
  p -= 90.0;
  return p >= 270.0 ? p - 360.0 : p;
}

InterauralPolar vertical_to_interaural(const VerticalPolar& v) {
  const double az = v.azimuth_deg * kDeg;
  const double el = v.elevation_deg * kDeg;
  const double x = std::cos(el) * std::cos(az);  // front
  const double y = std::cos(el) * std::sin(az);  // left
  const double z = std::sin(el);                 // up

  InterauralPolar out;
  out.lateral_deg = std::asin(std::clamp(-y, -1.0, 1.0)) / kDeg;
  if (std::hypot(x, z) < kPoleRadius) {
    out.polar_deg = 0.0;
  } else {
    out.polar_deg = normalize_polar(std::atan2(z, x) / kDeg);
  }
  return out;
}

InterauralPolar vertical_to_interaural_deg(double azimuth_deg, double elevation_deg) {
  return vertical_to_interaural(VerticalPolar{azimuth_deg, elevation_deg});
}

VerticalPolar interaural_to_vertical(const InterauralPolar& i) {
  const double lat = i.lateral_deg * kDeg;
  const double pol = i.polar_deg * kDeg;
  const double y = -std::sin(lat);
  const double x = std::cos(lat) * std::cos(pol);
  const double z = std::cos(lat) * std::sin(pol);

  VerticalPolar out;
  out.elevation_deg = std::asin(std::clamp(z, -1.0, 1.0)) / kDeg;
  if (std::hypot(x, y) < kPoleRadius) {
    out.azimuth_deg = 0.0;
  } else {
    out.azimuth_deg = normalize_azimuth(std::atan2(y, x) / kDeg);
  }
  return out;
}

ElevationClass classify(const InterauralPolar& i) {
  double polar = normalize_polar(i.polar_deg);
  if (std::abs(i.lateral_deg) > 60.0) {
    return (polar >= 0.0 && polar < 180.0) ? ElevationClass::LateralUp
                                           : ElevationClass::LateralDown;
  }
  // -90 and 270 are the same direction; only (200, 270] contains it.
  if (polar <= -90.0) polar += 360.0;
  for (const auto& [upper, cls] : kMedialUpper) {
    if (polar <= upper) return cls;
  }
  return ElevationClass::BackDown;
}

Direction Direction::from_vertical(const VerticalPolar& v, std::optional<double> distance_m) {
  Direction d;
  d.vertical = VerticalPolar{normalize_azimuth(v.azimuth_deg), v.elevation_deg};
  d.interaural = vertical_to_interaural(d.vertical);
  d.label = classify(d.interaural);
  d.source_distance_m = distance_m;
  return d;
}

std::pair<std::vector<double>, std::vector<double>> ipsi_contra_swap(
    std::span<const double> left, std::span<const double> right, double lateral_deg) {
  if (left.size() != right.size()) {
    throw DataError("ipsi_contra_swap: channel length mismatch (" +
                    std::to_string(left.size()) + " vs " + std::to_string(right.size()) +
                    ")");
  }
  std::vector<double> l(left.begin(), left.end());
  std::vector<double> r(right.begin(), right.end());
  if (lateral_deg > 0.0) return {std::move(r), std::move(l)};
  return {std::move(l), std::move(r)};
}

}  // namespace hrtfxai
