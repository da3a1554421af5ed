#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "photoread/count_model.hpp"

namespace photoread {

/// Shot file, version 1 (see docs/formats.md):
///
///   # photoread-shots v1
///   # exposure_tag: 12.5ms
///   # roi_ids: roi0,roi1
///   # calib_g: 0.8,2            (optional, alpha,beta)
///   # calib_f: 11.625,3.75      (optional)
///   # time: 2.1e-05            (optional, seconds)
///   # reference: 0.86,0.86     (optional, one per ROI)
///   # config: {...}            (optional single-line JSON echo)
///   roi_id,shot_index,count
///   roi0,0,3
///
/// Header keys appear in this order; rows are grouped by ROI in header order with shot
/// indices 0..n-1. Reals are written in shortest round-trip form.
struct ShotFile {
  static constexpr int kVersion = 1;

  std::string exposure_tag;
  std::vector<ShotRecord> records;
  std::optional<SuperPoissonParams> calib_g;
  std::optional<SuperPoissonParams> calib_f;
  std::optional<double> time;
  std::vector<double> reference;  // empty or one per ROI
  std::string config_echo;

  void validate() const;
};

/// Shortest round-trip decimal form of a double.
std::string format_real(double v);

void write_shot_file(std::ostream& out, const ShotFile& file);
std::string write_shot_file(const ShotFile& file);
void save_shot_file(const ShotFile& file, const std::filesystem::path& path);

/// Throws ErrorKind::kData with the offending line number on malformed input.
ShotFile read_shot_file(std::istream& in);
ShotFile parse_shot_file(const std::string& text);
ShotFile load_shot_file(const std::filesystem::path& path);

}  // namespace photoread
