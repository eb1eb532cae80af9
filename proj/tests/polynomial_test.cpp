#include "mvp/polynomial.hpp"

#include "support.hpp"

#include <gtest/gtest.h>

#include <vector>

using namespace mvp;
using testing_support::Gen;

namespace {

double power_sum(const std::vector<double>& p, double u) {
  double f = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) f += p[i] * std::pow(u, static_cast<double>(i));
  return f;
}

// Sign scan of the derivative on a dense grid. Returns +1/-1 for a single
// strict sign, 0 otherwise, along with the smallest |slope| seen.
std::pair<int, double> derivative_sign_scan(const std::vector<double>& p, double lo, double hi) {
  int sign = 0;
  double min_abs = 1e300;
  bool mixed = false;
  for (int i = 0; i <= 20000; ++i) {
    const double u = lo + (hi - lo) * i / 20000.0;
    double d = 0.0;
    for (std::size_t k = 1; k < p.size(); ++k) d += static_cast<double>(k) * p[k] * std::pow(u, static_cast<double>(k - 1));
    min_abs = std::min(min_abs, std::abs(d));
    const int s = d > 0 ? 1 : (d < 0 ? -1 : 0);
    if (s == 0 || (sign != 0 && s != sign)) mixed = true;
    if (s != 0) sign = s;
  }
  return {mixed ? 0 : sign, min_abs};
}

}  // namespace

TEST(CommandToForce, HornerMatchesPowerSum) {
  Gen g(21);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> p(static_cast<std::size_t>(g.integer(1, 5)));
    for (auto& c : p) c = g.uniform(-10, 10);
    const double u = g.uniform(-2, 2);
    EXPECT_NEAR(command_to_force(p, u), power_sum(p, u), 1e-9);
  }
}

TEST(Monotone, RejectsPolynomialWithInteriorTurningPoint) {
  // derivative 1 - 10u changes sign at u = 0.1
  EXPECT_FALSE(is_strictly_monotone(std::vector<double>{0, 1, -5}, 0.0, 1.0));
  EXPECT_TRUE(is_strictly_monotone(std::vector<double>{0, 1, -5}, 0.2, 1.0));
}

TEST(Monotone, StockPolynomialsAreMonotone) {
  EXPECT_TRUE(is_strictly_monotone(std::vector<double>{0, 30, 0, 10}, -1, 1));
  EXPECT_TRUE(is_strictly_monotone(std::vector<double>{0, 20, 20}, 0, 1));
}

TEST(Monotone, ConstantAndEmptyRangeAreNotMonotone) {
  EXPECT_FALSE(is_strictly_monotone(std::vector<double>{3.0}, 0, 1));
  EXPECT_FALSE(is_strictly_monotone(std::vector<double>{0, 1}, 1, 1));
}

TEST(Monotone, AgreesWithDerivativeSignScan) {
  Gen g(22);
  int compared = 0;
  for (int i = 0; i < 2000; ++i) {
    std::vector<double> p(static_cast<std::size_t>(g.integer(2, 5)));
    for (auto& c : p) c = g.uniform(-5, 5);
    const double lo = g.uniform(-1.5, 0.5), hi = lo + g.uniform(0.1, 2.0);
    const auto [sign, min_abs] = derivative_sign_scan(p, lo, hi);
    if (min_abs < 1e-3) continue;  // tangency: grid cannot decide
    ++compared;
    EXPECT_EQ(is_strictly_monotone(p, lo, hi), sign != 0) << "lo=" << lo << " hi=" << hi;
  }
  EXPECT_GT(compared, 1000);
}

TEST(ForceToCommand, RoundTripOnStockPolynomials) {
  Gen g(23);
  const std::vector<std::pair<std::vector<double>, std::pair<double, double>>> cases = {
      {{0, 30, 0, 10}, {-1, 1}}, {{0, 20, 20}, {0, 1}}};
  for (const auto& [poly, range] : cases) {
    const double f_lo = command_to_force(poly, range.first), f_hi = command_to_force(poly, range.second);
    for (int i = 0; i < 1000; ++i) {
      const double f = g.uniform(f_lo, f_hi);
      const CommandResult c = force_to_command(poly, f, range.first, range.second);
      EXPECT_FALSE(c.saturated);
      EXPECT_NEAR(command_to_force(poly, c.command), f, 1e-6);
    }
  }
}

TEST(ForceToCommand, DecreasingPolynomial) {
  const std::vector<double> p{5, -10};
  const CommandResult c = force_to_command(p, 0.0, 0.0, 1.0);
  EXPECT_NEAR(c.command, 0.5, 1e-12);
  EXPECT_DOUBLE_EQ(force_to_command(p, 100.0, 0.0, 1.0).command, 0.0);
  EXPECT_TRUE(force_to_command(p, 100.0, 0.0, 1.0).saturated);
}

TEST(ForceToCommand, ClampsAndFlagsOutOfRange) {
  const std::vector<double> p{0, 20, 20};
  const CommandResult hi = force_to_command(p, 41.0, 0, 1);
  EXPECT_DOUBLE_EQ(hi.command, 1.0);
  EXPECT_TRUE(hi.saturated);
  const CommandResult lo = force_to_command(p, -1.0, 0, 1);
  EXPECT_DOUBLE_EQ(lo.command, 0.0);
  EXPECT_TRUE(lo.saturated);
  const CommandResult edge = force_to_command(p, 40.0, 0, 1);
  EXPECT_DOUBLE_EQ(edge.command, 1.0);
  EXPECT_FALSE(edge.saturated);
}
