#include <doctest.h>

#include <filesystem>
#include <sstream>

#include <json.hpp>

#include "oracles.hpp"
#include "smear/cli.hpp"
#include "smear/csv.hpp"

using namespace smear;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const auto p = fs::current_path() / "cli_scratch" / name;
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p, std::ios::binary) << s; }

}  // namespace

TEST_CASE("number formatting round-trips") {
  for (double v : {0.0, -0.0, 1.0, 0.1, 1e-300, 123456.789, -2.5, 1.0 / 3.0}) {
    CHECK(parse_double(format_number(v)) == v);
  }
  CHECK(format_number(-0.0) == "0");
  CHECK(format_number(0.5) == "0.5");
  CHECK_THROWS_AS(parse_double("abc"), FormatError);
}

TEST_CASE("csv parsing handles quotes and CRLF") {
  const auto rows = parse_csv("a,\"b,c\",\"d\"\"e\"\r\n1,2,3\n");
  REQUIRE(rows.size() == 2);
  CHECK(rows[0] == std::vector<std::string>{"a", "b,c", "d\"e"});
  CHECK(rows[1] == std::vector<std::string>{"1", "2", "3"});
  CHECK(csv_field("x,y") == "\"x,y\"");
  CHECK(csv_field("plain") == "plain");
}

TEST_CASE("feature csv round-trips") {
  std::vector<FeatureRow> rows(3);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i].image_id = "img," + std::to_string(i);
    rows[i].object_index = i;
    rows[i].box = {double(i), 1.5, 10.25, 20};
    for (std::size_t k = 0; k < kFeatureDim; ++k) rows[i].features[k] = 0.1 * double(k) - double(i) / 3.0;
  }
  rows[0].label = "ring";
  rows[1].label = "difficult";
  const auto text = write_feature_csv(rows);
  CHECK(text.rfind("image_id,object_index,xmin,ymin,xmax,ymax,", 0) == 0);
  CHECK(read_feature_csv(text) == rows);
  CHECK_THROWS_AS(read_feature_csv("a,b,c\n1,2,3\n"), FormatError);
}

TEST_CASE("usage errors exit with 2") {
  CHECK(run({}).code == cli::kExitUsage);
  CHECK(run({"frobnicate"}).code == cli::kExitUsage);
  CHECK(run({"validate", "--no-such-flag"}).code == cli::kExitUsage);
  CHECK(run({"eval", "--gt", "x.json"}).code == cli::kExitUsage);
  CHECK(run({"--help"}).code == cli::kExitOk);
}

TEST_CASE("validation outcomes") {
  const auto dir = scratch("validate");
  write(dir / "gt.json",
        R"([{"id":"a","width":100,"height":80,"path":"a.png","objects":[{"bbox":[10,10,50,50],"label":"rbc","difficult":false},{"bbox":[1,1,9,9],"label":"ring","difficult":true}]}])");
  write(dir / "bad.json",
        R"([{"id":"a","width":100,"height":80,"path":"a.png","objects":[{"bbox":[10,10,10,50],"label":"rbc","difficult":false}]}])");
  const auto ok = run({"validate", "--annotations", (dir / "gt.json").string()});
  CHECK(ok.code == cli::kExitOk);
  CHECK(ok.out.find("1 images, 2 objects") != std::string::npos);
  CHECK(ok.out.find("difficult: 1") != std::string::npos);
  const auto bad = run({"validate", "--annotations", (dir / "bad.json").string()});
  CHECK(bad.code == cli::kExitFailure);
  CHECK(bad.err.find("object 0") != std::string::npos);
  CHECK(run({"validate", "--annotations", (dir / "missing.json").string()}).code == cli::kExitFailure);
}

TEST_CASE("eval writes metrics and tables with the echoed config") {
  const auto dir = scratch("eval");
  write(dir / "gt.json",
        R"([{"id":"a","width":100,"height":80,"path":"a.png","objects":[)"
        R"({"bbox":[0,0,10,10],"label":"ring","difficult":false},{"bbox":[20,0,30,10],"label":"schizont","difficult":false},)"
        R"({"bbox":[40,0,50,10],"label":"trophozoite","difficult":false},{"bbox":[60,0,70,10],"label":"gametocyte","difficult":false}]}])");
  write(dir / "dets.json",
        R"([{"id":"a","width":100,"height":80,"path":"a.png","objects":[)"
        R"({"bbox":[0,0,10,10],"label":"ring","score":0.9},{"bbox":[20,0,30,10],"label":"schizont","score":0.65},)"
        R"({"bbox":[40,0,50,10],"label":"ring","score":0.8},{"bbox":[60,0,70,10],"label":"gametocyte","score":0.64}]}])");
  const auto out = dir / "out";
  const auto r = run({"eval", "--gt", (dir / "gt.json").string(), "--dets", (dir / "dets.json").string(), "--iou",
                      "0.4", "--score", "0.65", "--out", out.string()});
  REQUIRE(r.code == cli::kExitOk);
  const auto metrics = nlohmann::json::parse(oracle::slurp(out / "metrics.json"));
  CHECK(metrics["accuracy"].get<double>() == 0.5);
  CHECK(metrics["per_class"]["ring"]["tp"].get<int>() == 1);
  for (const char* f : {"counts.csv", "counts.tsv", "confusion.csv", "run_config.json"}) CHECK(fs::exists(out / f));
  const auto config = nlohmann::json::parse(oracle::slurp(out / "run_config.json"));
  CHECK(config["subcommand"] == "eval");
  CHECK(config["options"]["score"] == "0.65");
  CHECK(config["options"]["iou"] == "0.4");

  const auto again = dir / "again";
  run({"eval", "--gt", (dir / "gt.json").string(), "--dets", (dir / "dets.json").string(), "--out", again.string()});
  CHECK(oracle::slurp(again / "metrics.json") == oracle::slurp(out / "metrics.json"));
}

TEST_CASE("report reproduces the published count tables") {
  const auto dir = scratch("report");
  for (const std::string name : {"fig5", "fig6a", "fig8"}) {
    const auto r = run({"report", "--counts", std::string(FIXTURE_DIR) + "/" + name + ".tsv", "--out",
                        (dir / name).string()});
    REQUIRE(r.code == cli::kExitOk);
    CHECK(oracle::slurp(dir / name / "counts.tsv") == oracle::fixture(name + ".tsv"));
    // The CSV form read back renders the same grid.
    const auto csv_out = dir / (name + "_csv");
    REQUIRE(run({"report", "--counts", (dir / name / "counts.csv").string(), "--out", csv_out.string()}).code == 0);
    CHECK(oracle::slurp(csv_out / "counts.tsv") == oracle::fixture(name + ".tsv"));
  }
  const auto empty = run({"report", "--out", (dir / "empty").string()});
  CHECK(empty.code == cli::kExitFailure);
  CHECK(empty.err.find("nothing to report") != std::string::npos);
}

TEST_CASE("agree writes the annotator table") {
  const auto dir = scratch("agree");
  write(dir / "a.json",
        R"([{"id":"a","width":100,"height":80,"path":"a.png","objects":[{"bbox":[0,0,10,10],"label":"ring","difficult":false},{"bbox":[20,0,30,10],"label":"ring","difficult":false}]}])");
  write(dir / "b.json",
        R"([{"id":"a","width":100,"height":80,"path":"a.png","objects":[{"bbox":[0,0,10,10],"label":"ring","difficult":false}]}])");
  const auto r = run({"agree", "--a", (dir / "a.json").string(), "--b", (dir / "b.json").string(), "--out",
                      (dir / "out").string()});
  REQUIRE(r.code == cli::kExitOk);
  CHECK(oracle::slurp(dir / "out" / "counts.tsv").find("ring\t2\t1\t67\n") != std::string::npos);
  write(dir / "c.json", R"([{"id":"zzz","width":100,"height":80,"path":"a.png","objects":[]}])");
  CHECK(run({"agree", "--a", (dir / "a.json").string(), "--b", (dir / "c.json").string(), "--out",
             (dir / "bad").string()})
            .code == cli::kExitFailure);
}

TEST_CASE("stats and split") {
  const auto dir = scratch("split");
  std::string text = "[";
  for (int i = 0; i < 10; ++i) {
    text += std::string(i ? "," : "") + R"({"id":"i)" + std::to_string(i) +
            R"(","width":10,"height":10,"path":"x.png","objects":[{"bbox":[1,1,3,3],"label":"rbc","difficult":false}]})";
  }
  write(dir / "gt.json", text + "]");
  const auto s = run({"stats", "--annotations", (dir / "gt.json").string()});
  CHECK(s.code == 0);
  CHECK(s.out.find("RBC,10,1\n") != std::string::npos);
  REQUIRE(run({"split", "--annotations", (dir / "gt.json").string(), "--val-fraction", "0.2", "--seed", "7",
               "--out", (dir / "out").string()})
              .code == 0);
  const auto val = nlohmann::json::parse(oracle::slurp(dir / "out" / "val.json"));
  CHECK(val["split"] == "val");
  CHECK(val["images"].size() == 2);
}
