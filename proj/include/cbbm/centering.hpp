#pragma once

namespace cbbm {

/// Bramson centering m(t) = sqrt(2) t - (3 / (2 sqrt(2))) log t; requires t > 0.
double m_of_t(double t);

}  // namespace cbbm
