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

#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <utility>
#include <vector>

namespace hrtfxai {

// Azimuth counterclockwise from the front (positive = listener's left),
// elevation positive upwards. This is how measurement files store positions.
struct VerticalPolar {
  double azimuth_deg = 0.0;    // [-180, 180)
  double elevation_deg = 0.0;  // [-90, 90]
};

// Horizontal-polar (interaural) coordinates used for labelling.
struct InterauralPolar {
  double lateral_deg = 0.0;  // [-90, 90], negative = left
  double polar_deg = 0.0;    // [-90, 270), 0 front, 90 above, 180 rear
};

enum class ElevationClass : int {
  FrontDown = 0,
  FrontLevel,
  FrontUp,
  Up,
  BackUp,
  BackLevel,
  BackDown,
  LateralUp,
  LateralDown,
};

inline constexpr int kNumClasses = 9;

inline constexpr std::array<ElevationClass, kNumClasses> kAllClasses = {
    ElevationClass::FrontDown, ElevationClass::FrontLevel, ElevationClass::FrontUp,
    ElevationClass::Up,        ElevationClass::BackUp,     ElevationClass::BackLevel,
    ElevationClass::BackDown,  ElevationClass::LateralUp,  ElevationClass::LateralDown,
};

constexpr int to_index(ElevationClass c) { return static_cast<int>(c); }
ElevationClass class_from_index(int index);

// Long name ("FrontDown") and the two-letter code used in exports ("FD").
std::string_view class_name(ElevationClass c);
std::string_view class_code(ElevationClass c);
// Accepts either the long name or the code, case-insensitive.
std::optional<ElevationClass> parse_class(std::string_view text);

double normalize_azimuth(double deg);
double normalize_polar(double deg);

InterauralPolar vertical_to_interaural(const VerticalPolar& v);
InterauralPolar vertical_to_interaural_deg(double azimuth_deg, double elevation_deg);
VerticalPolar interaural_to_vertical(const InterauralPolar& i);

// Table of polar sectors for the medial classes, half-open (lower, upper].
// |lateral| > 60 overrides with the lateral up/down split.
ElevationClass classify(const InterauralPolar& i);

struct Direction {
  InterauralPolar interaural;
  VerticalPolar vertical;
  ElevationClass label = ElevationClass::FrontLevel;
  std::optional<double> source_distance_m;

  static Direction from_vertical(const VerticalPolar& v,
                                 std::optional<double> distance_m = std::nullopt);
};

// Orders a left/right pair into (ipsilateral, contralateral). Sources on the
// left (lateral < 0) and on the median plane keep left as ipsilateral.
std::pair<std::vector<double>, std::vector<double>> ipsi_contra_swap(
    std::span<const double> left, std::span<const double> right, double lateral_deg);

}  // namespace hrtfxai
