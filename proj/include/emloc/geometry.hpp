#pragma once

#include <string>
#include <vector>

#include "emloc/types.hpp"

namespace emloc {

// Thin wire dipole, axis parallel to y.
struct Dipole {
  Vec3 position = Vec3::Zero();  // m
  double half_length = 0.0;      // m
  double radius = 0.0;           // m
};

struct DipoleDims {
  double half_length = 0.0;  // m
  double radius = 0.0;       // m
};

enum class LayoutKind { BSArray, RIS, Sources };

// Ordered element set. `origin` and `rotation_phi` keep the frame the layout
// was constructed in (identity for BS arrays and source sets); the FF model
// needs them to work in layout-local coordinates.
struct ElementLayout {
  std::vector<Dipole> elements;
  LayoutKind kind = LayoutKind::BSArray;
  Vec3 origin = Vec3::Zero();
  double rotation_phi = 0.0;  // rad, rotation of the local x-axis in the x,z-plane
  std::string name;

  int size() const { return static_cast<int>(elements.size()); }
  RMatrix positions() const;  // 3 x n
};

// Non-uniform per-axis spacing pattern, gaps in units of the base spacing.
struct RedundancyPattern {
  std::vector<int> gaps;
  double base_spacing = 0.0;  // m

  int num_positions() const { return static_cast<int>(gaps.size()) + 1; }
  // cumulative grid offsets {0, g1, g1+g2, ...}
  std::vector<int> grid_offsets() const;
};

ElementLayout build_uniform_array(int nh, int nv, double dh, double dv, const DipoleDims& dims,
                                  LayoutKind kind = LayoutKind::BSArray);

ElementLayout build_ris_layout(int nh, int nv, double dh, double dv, const Vec3& origin,
                               double phi, const DipoleDims& dims);

ElementLayout build_min_redundancy_layout(const RedundancyPattern& pattern_h,
                                          const RedundancyPattern& pattern_v,
                                          const DipoleDims& dims,
                                          LayoutKind kind = LayoutKind::BSArray,
                                          const Vec3& origin = Vec3::Zero(), double phi = 0.0);

ElementLayout build_sources(const std::vector<Vec3>& positions, const DipoleDims& dims);

}  // namespace emloc
