#pragma once

#include <cstdint>
#include <vector>

#include "gls/datagen.hpp"

namespace gls::testing {

struct TaskPair {
  Dataset source;
  Dataset target;
};

/// Three well-separated classes on the unit circle, p_S = [.6, .2, .2] and
/// p_T = [.2, .2, .6] with exact class counts, so w* = [1/3, 1, 3].
inline TaskPair shifted_three_class(std::uint64_t seed, int n = 2000) {
  DomainSpec s;
  s.k = 3;
  s.d = 2;
  s.sigma = 0.3;
  s.n = n;
  s.stratified = true;
  s.label_dist = {0.6, 0.2, 0.2};
  s.seed = 1000 + 2 * seed;
  DomainSpec t = s;
  t.label_dist = {0.2, 0.2, 0.6};
  t.tag = DomainTag::Target;
  t.seed = s.seed + 1;
  return {make_gaussian_domain(s), make_gaussian_domain(t)};
}

/// Balanced ten-class base pair for the label-shift task suite.
inline TaskPair ten_class_base(std::uint64_t seed, int n = 2000) {
  DomainSpec s;
  s.k = 10;
  s.d = 2;
  s.n = n;
  s.stratified = true;
  s.label_dist.assign(10, 0.1);
  s.seed = 5000 + 2 * seed;
  DomainSpec t = s;
  t.tag = DomainTag::Target;
  t.seed = s.seed + 1;
  return {make_gaussian_domain(s), make_gaussian_domain(t)};
}

}  // namespace gls::testing
