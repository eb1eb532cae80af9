#pragma once

// The twelve generalized rows of the allocation matrix and the controllable
// channel each one carries.

#include <array>
#include <bitset>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace mvp {

/// Row order is the allocation row order: body force xyz, body torque xyz,
/// earth force xyz, earth torque xyz.
enum class Dof : std::uint8_t {
  kSurge = 0,   // body force x, velocity channel
  kSway,        // body force y, velocity channel
  kHeave,       // body force z, velocity channel
  kRollRate,    // body torque x, angular-rate channel
  kPitchRate,   // body torque y
  kYawRate,     // body torque z
  kX,           // earth force x, position channel
  kY,           // earth force y
  kDepth,       // earth force z, position channel (depth, positive down)
  kRoll,        // earth torque x, attitude channel
  kPitch,       // earth torque y
  kYaw,         // earth torque z
};

inline constexpr std::size_t kDofCount = 12;

using DofMask = std::bitset<kDofCount>;

inline constexpr std::array<Dof, kDofCount> kAllDofs = {
    Dof::kSurge, Dof::kSway,  Dof::kHeave, Dof::kRollRate, Dof::kPitchRate, Dof::kYawRate,
    Dof::kX,     Dof::kY,     Dof::kDepth, Dof::kRoll,     Dof::kPitch,     Dof::kYaw};

constexpr std::size_t index(Dof d) { return static_cast<std::size_t>(d); }

enum class DofKind { kVelocity, kAngularRate, kPosition, kAngle };

constexpr DofKind dof_kind(Dof d) {
  const auto i = index(d);
  if (i < 3) return DofKind::kVelocity;
  if (i < 6) return DofKind::kAngularRate;
  if (i < 9) return DofKind::kPosition;
  return DofKind::kAngle;
}

/// Body row and earth row acting on the same physical axis.
constexpr Dof counterpart(Dof d) {
  const auto i = index(d);
  return static_cast<Dof>(i < 6 ? i + 6 : i - 6);
}

inline constexpr std::array<std::string_view, kDofCount> kDofNames = {
    "surge", "sway", "heave", "roll_rate", "pitch_rate", "yaw_rate",
    "x",     "y",    "depth", "roll",      "pitch",      "yaw"};

constexpr std::string_view dof_name(Dof d) { return kDofNames[index(d)]; }

/// Accepts the canonical names plus "heading" for yaw.
inline std::optional<Dof> dof_from_name(std::string_view name) {
  if (name == "heading") return Dof::kYaw;
  for (std::size_t i = 0; i < kDofCount; ++i)
    if (kDofNames[i] == name) return static_cast<Dof>(i);
  return std::nullopt;
}

/// Partial map Dof -> value with deterministic (row-order) iteration.
class DofValues {
 public:
  void set(Dof d, double v) { values_[index(d)] = v; }
  void erase(Dof d) { values_[index(d)].reset(); }
  bool contains(Dof d) const { return values_[index(d)].has_value(); }
  std::optional<double> get(Dof d) const { return values_[index(d)]; }
  double at(Dof d) const { return values_[index(d)].value(); }

  bool empty() const { return mask().none(); }
  std::size_t size() const { return mask().count(); }

  DofMask mask() const {
    DofMask m;
    for (std::size_t i = 0; i < kDofCount; ++i) m[i] = values_[i].has_value();
    return m;
  }

  template <typename Fn>
  void for_each(Fn&& fn) const {
    for (std::size_t i = 0; i < kDofCount; ++i)
      if (values_[i]) fn(static_cast<Dof>(i), *values_[i]);
  }

  bool operator==(const DofValues&) const = default;

 private:
  std::array<std::optional<double>, kDofCount> values_{};
};

inline std::string mask_to_string(const DofMask& m) {
  std::string out;
  for (std::size_t i = 0; i < kDofCount; ++i) {
    if (!m[i]) continue;
    if (!out.empty()) out += ',';
    out += kDofNames[i];
  }
  return out;
}

}  // namespace mvp
