#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "invadelab/percolation.hpp"

namespace invadelab {

/// Provenance of a cached p_n / q_n estimate.
struct ManifestKey {
  double eps = 0.05;
  std::int64_t trials = 0;
  std::uint64_t seed0 = 0;
  friend bool operator==(const ManifestKey&, const ManifestKey&) = default;
};

/// Cached p_n / q_n estimates, stored as JSON. Threshold-dependent event
/// detectors read from here so that every detection is tied to a citable
/// estimate.
class ThresholdManifest {
 public:
  static ThresholdManifest load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::string to_json() const;
  static ThresholdManifest from_json(const std::string& text);

  void put(const PnQn& entry);
  std::optional<PnQn> find(std::int64_t n, const ManifestKey& key) const;
  // Throws std::runtime_error naming the missing scale ("run pnqn first").
  const PnQn& require(std::int64_t n, const ManifestKey& key) const;

  std::size_t size() const { return entries_.size(); }
  const std::vector<PnQn>& entries() const { return entries_; }

 private:
  std::vector<PnQn> entries_;
};

}  // namespace invadelab
