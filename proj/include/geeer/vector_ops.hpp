#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>

#include "geeer/error.hpp"

namespace geeer {

template <typename A, typename B>
double dot(std::span<A> u, std::span<B> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) s += static_cast<double>(u[i]) * static_cast<double>(v[i]);
  return s;
}

template <typename A>
double norm(std::span<A> u) {
  return std::sqrt(dot(u, u));
}

/// u.v / (|u||v|); zero when either vector has zero norm.
template <typename A, typename B>
double cosine(std::span<A> u, std::span<B> v) {
  if (u.size() != v.size())
    throw ValidationError("cosine: dimension mismatch (" + std::to_string(u.size()) + " vs " +
                          std::to_string(v.size()) + ")");
  const double uu = dot(u, u), vv = dot(v, v);
  if (uu == 0.0 || vv == 0.0) return 0.0;
  // sqrt(uu * vv) is exact for u == v, so identical vectors score exactly 1.
  const double p = uu * vv;
  const double denom = std::isnormal(p) ? std::sqrt(p) : std::sqrt(uu) * std::sqrt(vv);
  return std::clamp(dot(u, v) / denom, -1.0, 1.0);
}

template <typename A, typename B>
double euclidean(std::span<A> u, std::span<B> v) {
  double s = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    const double d = static_cast<double>(u[i]) - static_cast<double>(v[i]);
    s += d * d;
  }
  return std::sqrt(s);
}

}  // namespace geeer
