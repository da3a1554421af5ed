#include "photoread/shot_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "photoread/error.hpp"

namespace photoread {
namespace {

constexpr const char* kMagicLine = "# photoread-shots v1";
constexpr const char* kColumns = "roi_id,shot_index,count";

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

[[noreturn]] void bad(std::size_t line, const std::string& msg) {
  fail(ErrorKind::kData, "shot file line " + std::to_string(line) + ": " + msg);
}

double parse_real(const std::string& s, std::size_t line) {
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) bad(line, "'" + s + "' is not a real number");
  return v;
}

template <typename Int>
Int parse_int(const std::string& s, std::size_t line, const char* what) {
  Int v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) bad(line, std::string(what) + " '" + s + "' is not an integer");
  return v;
}

SuperPoissonParams parse_params(const std::string& s, std::size_t line) {
  const std::vector<std::string> parts = split(s, ',');
  if (parts.size() != 2) bad(line, "calibration needs 'alpha,beta'");
  SuperPoissonParams p{parse_real(parts[0], line), parse_real(parts[1], line)};
  if (!(p.alpha > 0.0 && p.beta > 0.0)) bad(line, "calibration parameters must be positive");
  return p;
}

bool valid_roi_id(const std::string& id) {
  if (id.empty()) return false;
  for (char c : id) {
    if (c == ',' || c == '\n' || c == '\r' || c == '#' || c == ' ') return false;
  }
  return true;
}

}  // namespace

std::string format_real(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void ShotFile::validate() const {
  require(!records.empty(), ErrorKind::kData, "shot file needs at least one ROI");
  require(exposure_tag.find('\n') == std::string::npos, ErrorKind::kData, "exposure tag must be a single line");
  require(config_echo.find('\n') == std::string::npos, ErrorKind::kData, "config echo must be a single line");
  require(reference.empty() || reference.size() == records.size(), ErrorKind::kData,
          "reference needs one value per ROI");
  std::unordered_map<std::string, int> seen;
  for (const ShotRecord& r : records) {
    require(valid_roi_id(r.roi_id), ErrorKind::kData, "invalid ROI id '" + r.roi_id + "'");
    require(seen[r.roi_id]++ == 0, ErrorKind::kData, "duplicate ROI id '" + r.roi_id + "'");
    for (Count c : r.counts) require(c >= 0, ErrorKind::kData, "counts must be non-negative");
  }
}

void write_shot_file(std::ostream& out, const ShotFile& file) {
  file.validate();
  out << kMagicLine << '\n';
  out << "# exposure_tag: " << file.exposure_tag << '\n';
  out << "# roi_ids: ";
  for (std::size_t j = 0; j < file.records.size(); ++j) out << (j ? "," : "") << file.records[j].roi_id;
  out << '\n';
  if (file.calib_g) out << "# calib_g: " << format_real(file.calib_g->alpha) << ',' << format_real(file.calib_g->beta) << '\n';
  if (file.calib_f) out << "# calib_f: " << format_real(file.calib_f->alpha) << ',' << format_real(file.calib_f->beta) << '\n';
  if (file.time) out << "# time: " << format_real(*file.time) << '\n';
  if (!file.reference.empty()) {
    out << "# reference: ";
    for (std::size_t j = 0; j < file.reference.size(); ++j) out << (j ? "," : "") << format_real(file.reference[j]);
    out << '\n';
  }
  if (!file.config_echo.empty()) out << "# config: " << file.config_echo << '\n';
  out << kColumns << '\n';
  for (const ShotRecord& r : file.records) {
    for (std::size_t i = 0; i < r.counts.size(); ++i) out << r.roi_id << ',' << i << ',' << r.counts[i] << '\n';
  }
}

std::string write_shot_file(const ShotFile& file) {
  std::ostringstream out;
  write_shot_file(out, file);
  return out.str();
}

void save_shot_file(const ShotFile& file, const std::filesystem::path& path) {
  const std::string text = write_shot_file(file);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorKind::kData, "cannot open '" + path.string() + "' for writing");
  out << text;
  require(static_cast<bool>(out), ErrorKind::kData, "failed writing '" + path.string() + "'");
}

ShotFile read_shot_file(std::istream& in) {
  ShotFile file;
  std::string line;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(in, line)) return false;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return true;
  };

  if (!next()) bad(1, "file is empty");
  if (line.rfind("# photoread-shots v", 0) != 0) bad(line_no, "missing '# photoread-shots v1' header");
  const int version = parse_int<int>(line.substr(19), line_no, "version");
  if (version != ShotFile::kVersion) bad(line_no, "unsupported shot file version " + std::to_string(version));

  std::vector<std::string> roi_ids;
  bool have_tag = false, have_rois = false;
  while (true) {
    if (!next()) bad(line_no + 1, "missing column header '" + std::string(kColumns) + "'");
    if (line == kColumns) break;
    if (line.rfind("# ", 0) != 0) bad(line_no, "expected a '# key: value' header line");
    const std::size_t colon = line.find(": ", 2);
    const std::size_t bare = line.find(':', 2);
    const std::string key = line.substr(2, (colon == std::string::npos ? bare : colon) - 2);
    const std::string value = colon == std::string::npos ? std::string() : line.substr(colon + 2);
    if (bare == std::string::npos) bad(line_no, "expected a '# key: value' header line");
    if (key == "exposure_tag") {
      file.exposure_tag = value;
      have_tag = true;
    } else if (key == "roi_ids") {
      roi_ids = split(value, ',');
      for (const std::string& id : roi_ids) {
        if (!valid_roi_id(id)) bad(line_no, "invalid ROI id '" + id + "'");
      }
      have_rois = true;
    } else if (key == "calib_g") {
      file.calib_g = parse_params(value, line_no);
    } else if (key == "calib_f") {
      file.calib_f = parse_params(value, line_no);
    } else if (key == "time") {
      file.time = parse_real(value, line_no);
    } else if (key == "reference") {
      for (const std::string& v : split(value, ',')) file.reference.push_back(parse_real(v, line_no));
    } else if (key == "config") {
      file.config_echo = value;
    } else {
      bad(line_no, "unknown header key '" + key + "'");
    }
  }
  if (!have_tag) bad(line_no, "missing '# exposure_tag:' header");
  if (!have_rois || roi_ids.empty()) bad(line_no, "missing '# roi_ids:' header");

  std::unordered_map<std::string, std::size_t> index;
  for (const std::string& id : roi_ids) {
    if (index.count(id)) bad(line_no, "duplicate ROI id '" + id + "'");
    index[id] = file.records.size();
    file.records.push_back(ShotRecord{{}, id, file.exposure_tag});
  }
  if (!file.reference.empty() && file.reference.size() != roi_ids.size()) {
    bad(line_no, "reference needs one value per ROI");
  }

  std::size_t current = 0;
  while (next()) {
    if (line.empty()) bad(line_no, "blank line in shot table");
    const std::vector<std::string> cols = split(line, ',');
    if (cols.size() != 3) bad(line_no, "expected 'roi_id,shot_index,count'");
    const auto it = index.find(cols[0]);
    if (it == index.end()) bad(line_no, "ROI '" + cols[0] + "' is not listed in the header");
    if (it->second < current) bad(line_no, "rows must be grouped by ROI in header order");
    current = it->second;
    ShotRecord& r = file.records[current];
    const auto shot = parse_int<std::size_t>(cols[1], line_no, "shot index");
    if (shot != r.counts.size()) bad(line_no, "shot index " + cols[1] + " out of sequence");
    const auto count = parse_int<Count>(cols[2], line_no, "count");
    if (count < 0) bad(line_no, "counts must be non-negative");
    r.counts.push_back(count);
  }
  return file;
}

ShotFile parse_shot_file(const std::string& text) {
  std::istringstream in(text);
  return read_shot_file(in);
}

ShotFile load_shot_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::kData, "cannot open shot file '" + path.string() + "'");
  return read_shot_file(in);
}

}  // namespace photoread
