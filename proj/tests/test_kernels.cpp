#include <catch_amalgamated.hpp>

#include <cmath>
#include <random>
#include <vector>

#include "eprlock/kernels.hpp"

using namespace eprlock;

namespace {

std::vector<double> random_vector(std::mt19937_64& rng, std::size_t n, double lo = -3.0, double hi = 3.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<double> v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

// FMA contraction changes the last bit or two.
void require_close(const std::vector<double>& a, const std::vector<double>& b) {
  REQUIRE(a.size() == b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    REQUIRE(std::abs(a[k] - b[k]) <= 1e-15 * std::max({std::abs(a[k]), std::abs(b[k]), 1.0}));
  }
}

std::vector<const kernels::KernelTable*> variants() {
  std::vector<const kernels::KernelTable*> out;
  if (auto* t = kernels::avx2()) out.push_back(t);
  if (auto* t = kernels::neon()) out.push_back(t);
  return out;
}

void check_equivalence(const kernels::KernelTable& simd) {
  const auto& ref = kernels::scalar();
  std::mt19937_64 rng(17);
  for (std::size_t n : {0u, 1u, 2u, 3u, 4u, 5u, 7u, 8u, 9u, 15u, 16u, 17u, 31u, 64u, 65u, 1000u, 1023u}) {
    const auto a = random_vector(rng, n), b = random_vector(rng, n), c = random_vector(rng, n), d = random_vector(rng, n);
    std::vector<double> r1(n), r2(n);

    ref.rational_variance(a.data(), r1.data(), n, 0.7, 1.3);
    simd.rational_variance(a.data(), r2.data(), n, 0.7, 1.3);
    REQUIRE(r1 == r2);  // no fma on this path, so results are bit-identical
    require_close(r1, r2);

    ref.multiply(a.data(), b.data(), r1.data(), n);
    simd.multiply(a.data(), b.data(), r2.data(), n);
    require_close(r1, r2);

    ref.axpby(0.3, a.data(), -1.7, b.data(), r1.data(), n);
    simd.axpby(0.3, a.data(), -1.7, b.data(), r2.data(), n);
    require_close(r1, r2);

    // in place, as used by the detector model
    r1 = a;
    r2 = a;
    ref.axpby(0.9, r1.data(), 0.4, b.data(), r1.data(), n);
    simd.axpby(0.9, r2.data(), 0.4, b.data(), r2.data(), n);
    require_close(r1, r2);

    ref.rotate(a.data(), b.data(), c.data(), d.data(), r1.data(), n);
    simd.rotate(a.data(), b.data(), c.data(), d.data(), r2.data(), n);
    require_close(r1, r2);

    const auto z = random_vector(rng, 2 * n);
    std::vector<double> acc1 = c, acc2 = c;
    ref.accumulate_power(z.data(), acc1.data(), n);
    simd.accumulate_power(z.data(), acc2.data(), n);
    require_close(acc1, acc2);

    std::vector<double> z1 = z, z2 = z;
    ref.scale_complex(z1.data(), a.data(), n);
    simd.scale_complex(z2.data(), a.data(), n);
    require_close(z1, z2);

    r1 = a;
    r2 = a;
    ref.center_and_window(r1.data(), b.data(), 0.25, n);
    simd.center_and_window(r2.data(), b.data(), 0.25, n);
    require_close(r1, r2);

    // reductions reassociate
    double abs_sum = 0, sq = 0;
    for (double x : a) {
      abs_sum += std::abs(x);
      sq += x * x;
    }
    REQUIRE(std::abs(ref.sum(a.data(), n) - simd.sum(a.data(), n)) <= 1e-14 * std::max(abs_sum, 1.0));
    REQUIRE(std::abs(ref.sum_squares(a.data(), n) - simd.sum_squares(a.data(), n)) <= 1e-14 * std::max(sq, 1.0));
  }
}

}  // namespace

TEST_CASE("scalar kernels compute their documented formulas") {
  const auto& k = kernels::scalar();
  const std::vector<double> w{0.0, 1.0, 2.0};
  std::vector<double> out(3);
  k.rational_variance(w.data(), out.data(), 3, 5.0, 1.0);
  REQUIRE(out == std::vector<double>{5.0, 3.0, 1.8});
  std::vector<double> z{1.0, 2.0, 3.0, 4.0};
  std::vector<double> acc{1.0, 0.0};
  k.accumulate_power(z.data(), acc.data(), 2);
  REQUIRE(acc == std::vector<double>{6.0, 25.0});
  REQUIRE(k.sum(w.data(), 3) == 3.0);
  REQUIRE(k.sum_squares(w.data(), 3) == 5.0);
}

TEST_CASE("SIMD kernels match the scalar reference") {
  const auto tables = variants();
  if (tables.empty()) SKIP("no SIMD variant available on this machine");
  for (const auto* t : tables) {
    INFO("variant " << t->name);
    check_equivalence(*t);
  }
}

TEST_CASE("dispatch picks a usable table") {
  const auto& active = kernels::active();
  REQUIRE_FALSE(active.name.empty());
  const char* forced = std::getenv("EPRLOCK_KERNELS");
  if (forced != nullptr && std::string_view(forced) == "scalar") {
    REQUIRE(&active == &kernels::scalar());
  } else if (kernels::avx2() != nullptr) {
    REQUIRE(&active == kernels::avx2());
  }
}
