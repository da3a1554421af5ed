#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "photoread/bayes_em.hpp"
#include "photoread/cli.hpp"
#include "photoread/config.hpp"
#include "photoread/error.hpp"
#include "photoread/fixtures.hpp"
#include "photoread/network_io.hpp"
#include "photoread/shot_io.hpp"

using namespace photoread;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
  std::string err;
};

Run cli(std::vector<std::string> args) {
  args.insert(args.begin(), "photoread");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("photoread_cli_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream(p) << text;
}

std::string read_text(const fs::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ErrorKind parse_kind(const std::string& text) {
  try {
    parse_shot_file(text);
  } catch (const Error& e) {
    return e.kind();
  }
  return ErrorKind::kInvariant;
}

const char* kSimConfig = R"({"seed": 11, "g": {"alpha": 0.8, "beta": 2.0}, "f": {"alpha": 11.625, "beta": 3.75},
  "l": 0.4, "n_shots": 150, "rois": 2, "exposure_tag": "12.5ms"})";

}  // namespace

TEST_CASE("shot files round trip") {
  ShotFile f;
  f.exposure_tag = "12.5ms";
  f.records = {sample({{0.8, 2}, {11.625, 3.75}, 0.3}, 40, 1), sample({{0.8, 2}, {11.625, 3.75}, 0.6}, 25, 2)};
  f.records[1].roi_id = "roi1";
  f.calib_g = SuperPoissonParams{0.8, 2.0};
  f.calib_f = SuperPoissonParams{11.625, 3.75};
  f.time = 2.1e-5;
  f.reference = {0.1 + 0.2, 0.6};
  f.config_echo = R"({"seed":1})";
  const std::string text = write_shot_file(f);
  const ShotFile back = parse_shot_file(text);
  CHECK(back.records.size() == 2);
  CHECK(back.records[0].counts == f.records[0].counts);
  CHECK(back.records[1].roi_id == "roi1");
  CHECK(*back.calib_g == *f.calib_g);
  CHECK(*back.time == *f.time);
  CHECK(back.reference == f.reference);
  CHECK(back.config_echo == f.config_echo);
  CHECK(write_shot_file(back) == text);
  CHECK(format_real(0.1 + 0.2) == "0.30000000000000004");
}

TEST_CASE("malformed shot files are data errors") {
  const std::string good =
      "# photoread-shots v1\n# exposure_tag: x\n# roi_ids: a\nroi_id,shot_index,count\na,0,3\na,1,0\n";
  CHECK(parse_shot_file(good).records[0].counts == std::vector<Count>{3, 0});
  CHECK(parse_kind("# photoread-shots v2\n") == ErrorKind::kData);
  CHECK(parse_kind(good.substr(0, good.size() - 6) + "a,2,1\n") == ErrorKind::kData);
  std::string neg = good;
  neg.replace(neg.find("a,1,0"), 5, "a,1,-4");
  CHECK(parse_kind(neg) == ErrorKind::kData);
  std::string text = good;
  text.replace(text.find("a,0,3"), 5, "a,0,x");
  CHECK(parse_kind(text) == ErrorKind::kData);
  try {
    parse_shot_file(text);
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("line 5") != std::string::npos);
  }
  CHECK(parse_kind(good + "b,0,1\n") == ErrorKind::kData);
}

TEST_CASE("configs reject bad fields") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_config(text);
    } catch (const Error& e) {
      return e.kind();
    }
    return ErrorKind::kInvariant;
  };
  CHECK(kind_of(R"({"l": 1.5})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"colour": 1})") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"em": {"max_iter": 0}})") == ErrorKind::kConfig);
  CHECK(kind_of("{") == ErrorKind::kConfig);
  CHECK(kind_of(R"({"g": {"alpha": 2, "beta": 1}, "f": {"alpha": 1, "beta": 1}})") == ErrorKind::kConfig);
  try {
    parse_config(R"({"training": {"epochs": -1}})");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("training.epochs") != std::string::npos);
  }
  const RunConfig c = parse_config(kSimConfig);
  CHECK(c.rois == 2);
  CHECK(c.g->alpha == 0.8);
}

TEST_CASE("simulate is deterministic and infer matches the library") {
  const fs::path dir = scratch("sim");
  write_text(dir / "cfg.json", kSimConfig);
  const Run a = cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "a.csv").string()});
  const Run b = cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "b.csv").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(read_text(dir / "a.csv") == read_text(dir / "b.csv"));
  const Run c = cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "c.csv").string(),
                     "--seed", "12"});
  CHECK(read_text(dir / "a.csv") != read_text(dir / "c.csv"));

  const ShotFile file = load_shot_file(dir / "a.csv");
  const Run inf = cli({"infer", (dir / "a.csv").string(), "--format", "json"});
  REQUIRE(inf.code == 0);
  const auto doc = nlohmann::json::parse(inf.out);
  REQUIRE(doc["rois"].size() == 2);
  for (std::size_t j = 0; j < 2; ++j) {
    const EmResult em = run_em(file.records[j], *file.calib_g);
    CHECK(doc["rois"][j]["l"].get<double>() == em.posterior.mean);
    CHECK(doc["rois"][j]["sd"].get<double>() == em.posterior.sd);
  }

  const Run fine = cli({"infer", (dir / "a.csv").string(), "--grid", "2001"});
  REQUIRE(fine.code == 0);
  const auto fdoc = nlohmann::json::parse(fine.out);
  CHECK(fdoc["grid"] == 2001);
  EmConfig cfg;
  cfg.grid_size = 2001;
  CHECK(fdoc["rois"][0]["l"].get<double>() == run_em(file.records[0], *file.calib_g, PriorSpec::uniform(), cfg).posterior.mean);

  const Run th = cli({"infer", (dir / "a.csv").string(), "--method", "threshold", "--format", "csv"});
  REQUIRE(th.code == 0);
  CHECK(th.out.rfind("roi_id,n,method,l,sd", 0) == 0);
  fs::remove_all(dir);
}

TEST_CASE("exit codes") {
  const fs::path dir = scratch("codes");
  write_text(dir / "nocal.csv",
             "# photoread-shots v1\n# exposure_tag: x\n# roi_ids: a\nroi_id,shot_index,count\na,0,3\na,1,0\n");
  CHECK(cli({"infer", (dir / "nocal.csv").string()}).code == 4);

  write_text(dir / "empty.csv",
             "# photoread-shots v1\n# exposure_tag: x\n# roi_ids: a,b\n# calib_g: 0.8,2\nroi_id,shot_index,count\na,0,3\n");
  CHECK(cli({"infer", (dir / "empty.csv").string()}).code == 6);

  write_text(dir / "bad.csv", "hello\n");
  CHECK(cli({"infer", (dir / "bad.csv").string()}).code == 3);
  CHECK(cli({"infer", (dir / "missing.csv").string()}).code == 3);

  write_text(dir / "cfg.json", R"({"l": 1.5})");
  CHECK(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "x.csv").string()}).code == 2);

  NetworkWeights w = NetworkWeights::initialise(ArchitectureSpec{}, 1);
  std::vector<std::uint8_t> bytes = serialize_weights(w);
  bytes.resize(bytes.size() / 2);
  std::ofstream(dir / "trunc.weights", std::ios::binary).write(reinterpret_cast<const char*>(bytes.data()),
                                                                static_cast<std::streamsize>(bytes.size()));
  write_text(dir / "cfg.json", kSimConfig);
  REQUIRE(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "s.csv").string()}).code == 0);
  CHECK(cli({"infer", (dir / "s.csv").string(), "--method", "em-net", "--weights", (dir / "trunc.weights").string()})
            .code == 3);
  CHECK(cli({"infer", (dir / "s.csv").string(), "--method", "em-net"}).code == 2);
  CHECK(cli({"infer", (dir / "s.csv").string(), "--method", "nope"}).code == 2);
  CHECK(cli({"bogus"}).code == 2);
  CHECK(cli({"--help"}).code == 0);
  fs::remove_all(dir);
}

TEST_CASE("experiment configs write one file per time point") {
  const fs::path dir = scratch("exp");
  write_text(dir / "cfg.json", R"({"seed": 3, "g": {"alpha": 0.8, "beta": 2.0}, "f": {"alpha": 11.625, "beta": 3.75},
    "n_shots": 50, "experiment": {"kind": "rabi"}})");
  REQUIRE(cli({"simulate", "--config", (dir / "cfg.json").string(), "--out", (dir / "pts").string()}).code == 0);
  std::vector<std::string> files;
  for (int j = 0; j < 7; ++j) {
    char name[32];
    std::snprintf(name, sizeof(name), "point_%02d.csv", j);
    CHECK(fs::exists(dir / "pts" / name));
    files.push_back((dir / "pts" / name).string());
  }
  CHECK(load_shot_file(files[3]).time.value() == doctest::Approx(21e-6));
  std::vector<std::string> args{"compare"};
  args.insert(args.end(), files.begin(), files.end());
  args.insert(args.end(), {"--kind", "rabi", "--format", "json"});
  const Run a = cli(args);
  const Run b = cli(args);
  REQUIRE(a.code == 0);
  CHECK(a.out == b.out);
  fs::remove_all(dir);
}
