#include "emloc/geometry.hpp"

#include <cmath>
#include <numeric>
#include <set>

namespace emloc {

namespace {

void check_dipole_dims(const DipoleDims& dims) {
  if (!(dims.half_length > 0.0) || !(dims.radius > 0.0))
    throw std::invalid_argument("dipole dimensions must be positive");
  if (!(dims.radius < dims.half_length))
    throw std::invalid_argument("dipole radius must be smaller than its half-length");
}

void check_distinct_positions(const ElementLayout& layout) {
  for (size_t i = 0; i < layout.elements.size(); ++i)
    for (size_t j = i + 1; j < layout.elements.size(); ++j)
      if ((layout.elements[i].position - layout.elements[j].position).norm() == 0.0)
        throw std::invalid_argument("layout has two elements at the same position");
}

}  // namespace

RMatrix ElementLayout::positions() const {
  RMatrix p(3, size());
  for (int i = 0; i < size(); ++i) p.col(i) = elements[i].position;
  return p;
}

std::vector<int> RedundancyPattern::grid_offsets() const {
  std::vector<int> offs(gaps.size() + 1, 0);
  for (size_t i = 0; i < gaps.size(); ++i) offs[i + 1] = offs[i] + gaps[i];
  return offs;
}

ElementLayout build_uniform_array(int nh, int nv, double dh, double dv, const DipoleDims& dims,
                                  LayoutKind kind) {
  if (nh < 1 || nv < 1) throw std::invalid_argument("array dimensions must be >= 1");
  if (!(dh > 0.0) || !(dv > 0.0)) throw std::invalid_argument("element spacings must be positive");
  check_dipole_dims(dims);

  ElementLayout out;
  out.kind = kind;
  out.name = "uniform_" + std::to_string(nh) + "x" + std::to_string(nv);
  out.elements.reserve(static_cast<size_t>(nh) * nv);
  for (int n = 1; n <= nh * nv; ++n) {
    Dipole d;
    d.position.x() = dh * (-(nh - 1) / 2.0 + ((n - 1) % nh));
    d.position.y() = dv * ((nv - 1) / 2.0 + ((n - 1) / nh));
    d.position.z() = 0.0;
    d.half_length = dims.half_length;
    d.radius = dims.radius;
    out.elements.push_back(d);
  }
  check_distinct_positions(out);
  return out;
}

ElementLayout build_ris_layout(int nh, int nv, double dh, double dv, const Vec3& origin,
                               double phi, const DipoleDims& dims) {
  if (nh < 1 || nv < 1) throw std::invalid_argument("RIS dimensions must be >= 1");
  if (!(dh > 0.0) || !(dv > 0.0)) throw std::invalid_argument("element spacings must be positive");
  if (!origin.allFinite() || !std::isfinite(phi))
    throw std::invalid_argument("RIS origin and rotation must be finite");
  check_dipole_dims(dims);

  ElementLayout out;
  out.kind = LayoutKind::RIS;
  out.origin = origin;
  out.rotation_phi = phi;
  out.name = "ris_" + std::to_string(nh) + "x" + std::to_string(nv);
  out.elements.reserve(static_cast<size_t>(nh) * nv);
  for (int q = 1; q <= nh * nv; ++q) {
    const double x0 = dh * (-(nh - 1) / 2.0 + ((q - 1) % nh));
    const double y0 = dv * ((nv - 1) / 2.0 + ((q - 1) / nh));
    Dipole d;
    d.position.x() = origin.x() + std::cos(phi) * x0;
    d.position.y() = origin.y() + y0;
    d.position.z() = origin.z() + std::sin(phi) * x0;
    d.half_length = dims.half_length;
    d.radius = dims.radius;
    out.elements.push_back(d);
  }
  check_distinct_positions(out);
  return out;
}

ElementLayout build_min_redundancy_layout(const RedundancyPattern& pattern_h,
                                          const RedundancyPattern& pattern_v,
                                          const DipoleDims& dims, LayoutKind kind,
                                          const Vec3& origin, double phi) {
  for (const auto* p : {&pattern_h, &pattern_v}) {
    if (p->gaps.empty()) throw std::invalid_argument("redundancy pattern must be non-empty");
    if (!(p->base_spacing > 0.0)) throw std::invalid_argument("base spacing must be positive");
    for (int g : p->gaps)
      if (g < 1) throw std::invalid_argument("redundancy gaps must be >= 1");
  }
  check_dipole_dims(dims);

  // Per-axis positions at cumulative gap sums, then offset so the centroid
  // matches the uniform-array convention of eqs for x_n / y_n: x centroid at
  // 0, y centroid at base*(n_v - 1).
  auto axis_positions = [](const RedundancyPattern& p, bool vertical) {
    const auto offs = p.grid_offsets();
    const int n = static_cast<int>(offs.size());
    double mean = 0.0;
    for (int o : offs) mean += o;
    mean /= n;
    const double shift = vertical ? (n - 1) - mean : -mean;
    std::vector<double> pos(n);
    for (int i = 0; i < n; ++i) pos[i] = p.base_spacing * (offs[i] + shift);
    return pos;
  };
  const auto xs = axis_positions(pattern_h, false);
  const auto ys = axis_positions(pattern_v, true);

  ElementLayout out;
  out.kind = kind;
  out.origin = origin;
  out.rotation_phi = phi;
  out.name = "minred_" + std::to_string(xs.size()) + "x" + std::to_string(ys.size());
  out.elements.reserve(xs.size() * ys.size());
  for (double y0 : ys) {
    for (double x0 : xs) {
      Dipole d;
      d.position.x() = origin.x() + std::cos(phi) * x0;
      d.position.y() = origin.y() + y0;
      d.position.z() = origin.z() + std::sin(phi) * x0;
      d.half_length = dims.half_length;
      d.radius = dims.radius;
      out.elements.push_back(d);
    }
  }
  check_distinct_positions(out);
  return out;
}

ElementLayout build_sources(const std::vector<Vec3>& positions, const DipoleDims& dims) {
  if (positions.empty()) throw std::invalid_argument("source set must be non-empty");
  check_dipole_dims(dims);
  ElementLayout out;
  out.kind = LayoutKind::Sources;
  out.name = "sources_" + std::to_string(positions.size());
  for (const auto& p : positions) {
    if (!p.allFinite()) throw std::invalid_argument("source position must be finite");
    Dipole d;
    d.position = p;
    d.half_length = dims.half_length;
    d.radius = dims.radius;
    out.elements.push_back(d);
  }
  check_distinct_positions(out);
  return out;
}

}  // namespace emloc
