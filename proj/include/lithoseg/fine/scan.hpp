#pragma once

#include <cmath>
#include <string>

#include "lithoseg/error.hpp"

namespace lithoseg::fine {

// Optical and imaging parameters that set the profile length. Lengths in nm.
struct ScanGeometry {
  double k1 = 0.61;
  double lambda = 193.0;
  double na = 1.35;
  double delta_offset = 25.0;
  double d_deflection = 1.024e7;
  double m_mag = 1e4;
  int n_px = 1024;

  void validate() const {
    auto positive = [](double v, const char* name) {
      if (!(v > 0.0) || !std::isfinite(v)) throw DomainError(std::string("scan geometry: ") + name + " must be > 0");
    };
    positive(k1, "k1");
    positive(lambda, "lambda");
    positive(na, "na");
    positive(d_deflection, "d_deflection");
    positive(m_mag, "m_mag");
    if (!(delta_offset >= 0.0)) throw DomainError("scan geometry: delta_offset must be >= 0");
    if (na > 1.6) throw DomainError("scan geometry: na above 1.6 is not physical");
    if (n_px < 1) throw DomainError("scan geometry: n_px must be >= 1");
  }

  double pixel_size() const { return (d_deflection / m_mag) / n_px; }
  double resolution_limit() const { return k1 * lambda / na; }
};

inline int make_odd(int s) { return s % 2 == 0 ? s + 1 : s; }

// ceil((k1 lambda / NA + delta_offset) / R_px), bumped to the next odd value.
inline int compute_scan_size(const ScanGeometry& g) {
  g.validate();
  const double ratio = (g.resolution_limit() + g.delta_offset) / g.pixel_size();
  // Ratios within 1e-9 (relative) above an integer round down to it.
  const double raw = std::ceil(ratio - 1e-9 * std::max(1.0, ratio));
  return make_odd(static_cast<int>(raw));
}

}  // namespace lithoseg::fine
