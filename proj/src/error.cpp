#include "photoread/error.hpp"

namespace photoread {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDomain: return "domain";
    case ErrorKind::kDegenerate: return "degenerate";
    case ErrorKind::kNumerical: return "numerical";
    case ErrorKind::kInvariant: return "invariant";
    case ErrorKind::kArchitecture: return "architecture";
    case ErrorKind::kConfig: return "config";
    case ErrorKind::kData: return "data";
    case ErrorKind::kCalibration: return "calibration";
    case ErrorKind::kTraining: return "training";
  }
  return "unknown";
}

int exit_code(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kConfig: return 2;
    case ErrorKind::kData: return 3;
    case ErrorKind::kCalibration: return 4;
    case ErrorKind::kNumerical:
    case ErrorKind::kTraining: return 5;
    case ErrorKind::kDomain:
    case ErrorKind::kDegenerate:
    case ErrorKind::kInvariant:
    case ErrorKind::kArchitecture: return 6;
  }
  return 1;
}

}  // namespace photoread
