#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "maskwave/dsp.hpp"
#include "maskwave/embed.hpp"
#include "maskwave/manifest.hpp"
#include "maskwave/svm.hpp"

using namespace maskwave;
namespace fs = std::filesystem;

namespace {

int run(const std::string& args) {
  const std::string cmd =
      std::string(MASKWAVE_TOOL_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

const char* kTinyConfig = R"(
reduce.low_bins = 64
reduce.time_target = 64
reduce.pool = 4
gan.base_channels = 2
gan.disc_channels = 2
gan.res_blocks = 1
gan.epochs = 1
gan.steps_per_epoch = 2
embed.depths = 1,2
embed.base_channels = 4
embed.dims = 8,8
embed.epochs = 2
embed.lr = 0.003
embed.batch = 8
embed.runs = 1
synth.train = 12
synth.dev = 8
synth.test = 8
experiment.augmentations = none
experiment.seed = 5
)";

struct TempTree {
  fs::path root;
  TempTree() : root(fs::temp_directory_path() / "mw_cli") {
    fs::remove_all(root);
    fs::create_directories(root);
  }
  ~TempTree() { fs::remove_all(root); }
  std::string operator/(const std::string& leaf) const {
    return (root / leaf).string();
  }
};

}  // namespace

TEST_CASE("usage errors exit with status 2") {
  CHECK(run("definitely-not-a-subcommand") == 2);
  CHECK(run("extract --no-such-flag") == 2);
  CHECK(run("") == 2);
}

TEST_CASE("stage failures exit with status 1") {
  TempTree tmp;
  CHECK(run("extract --manifest " + (tmp / "missing.csv") + " --out " +
            (tmp / "out")) == 1);
}

TEST_CASE("full pipeline over every subcommand") {
  TempTree tmp;
  const std::string cfg_path = tmp / "tiny.cfg";
  {
    std::ofstream os(cfg_path);
    os << kTinyConfig;
  }

  // synth-data
  REQUIRE(run("synth-data --config " + cfg_path + " --out " + (tmp / "data") +
              " --seed 7") == 0);
  auto manifest = Manifest::load(tmp.root / "data" / "manifest.csv");
  CHECK(manifest.records.size() == 28);

  // extract, full geometry: canonical 2x513x250
  REQUIRE(run("extract --manifest " + (tmp / "data/manifest.csv") + " --out " +
              (tmp / "full")) == 0);
  {
    auto m = Manifest::load(tmp.root / "full" / "manifest.csv");
    const auto spec = dsp::read_spg(m.resolve(m.records[0]));
    CHECK(spec.channels == 2);
    CHECK(spec.freq_bins == 513);
    CHECK(spec.time_bins == 250);
  }

  // extract, reduced geometry for the learning stages
  REQUIRE(run("extract --manifest " + (tmp / "data/manifest.csv") +
              " --config " + cfg_path + " --geometry reduced --out " +
              (tmp / "red")) == 0);
  {
    auto m = Manifest::load(tmp.root / "red" / "manifest.csv");
    const auto spec = dsp::read_spg(m.resolve(m.records[0]));
    CHECK(spec.freq_bins == 16);
    CHECK(spec.time_bins == 16);
  }

  // augment (spec_mask twins)
  {
    std::ofstream os(tmp / "aug.cfg", std::ios::app);
    os << kTinyConfig << "augment.kind = spec_mask\n";
  }
  REQUIRE(run("augment --manifest " + (tmp / "data/manifest.csv") +
              " --config " + (tmp / "aug.cfg") + " --geometry reduced --out " +
              (tmp / "aug")) == 0);
  {
    auto m = Manifest::load(tmp.root / "aug" / "manifest.csv");
    CHECK(m.records.size() == 28 + 12);
    m.validate(true);
    long perturbed = 0;
    for (const auto& r : m.records)
      if (r.provenance == Provenance::perturbed) {
        ++perturbed;
        CHECK(r.split == Split::train);
      }
    CHECK(perturbed == 12);
  }

  // train-gan in both directions
  REQUIRE(run("train-gan --manifest " + (tmp / "red/manifest.csv") +
              " --config " + cfg_path + " --direction mask-to-nonmask --out " +
              (tmp / "gan_fwd") + " --seed 1") == 0);
  REQUIRE(run("train-gan --manifest " + (tmp / "red/manifest.csv") +
              " --config " + cfg_path + " --direction nonmask-to-mask --out " +
              (tmp / "gan_bwd") + " --seed 2") == 0);
  CHECK(fs::exists(tmp.root / "gan_fwd" / "g.nnp1"));
  CHECK(fs::exists(tmp.root / "gan_fwd" / "history.csv"));

  // translate
  REQUIRE(run("translate --manifest " + (tmp / "red/manifest.csv") +
              " --forward " + (tmp / "gan_fwd") + " --backward " +
              (tmp / "gan_bwd") + " --config " + cfg_path + " --out " +
              (tmp / "tr")) == 0);
  {
    auto m = Manifest::load(tmp.root / "tr" / "manifest.csv");
    CHECK(m.records.size() == 28 + 12);
    m.validate(true);
    CHECK(m.count(Split::train, Label::mask) == 12);
    CHECK(m.count(Split::train, Label::non_mask) == 12);
  }

  // train-embed on the translated manifest
  REQUIRE(run("train-embed --manifest " + (tmp / "tr/manifest.csv") +
              " --config " + cfg_path + " --out " + (tmp / "models") +
              " --seed 3") == 0);
  CHECK(fs::exists(tmp.root / "models" / "model_depth1.nnp1"));
  CHECK(fs::exists(tmp.root / "models" / "config.cfg"));

  // extract-embed over the original (untranslated) records
  REQUIRE(run("extract-embed --manifest " + (tmp / "red/manifest.csv") +
              " --models " + (tmp / "models") + " --out " +
              (tmp / "emb.emb1")) == 0);
  const auto matrix = emb::read_emb(tmp.root / "emb.emb1");
  CHECK(matrix.rows == 28);
  CHECK(matrix.cols == 16);

  REQUIRE(run("extract-embed --manifest " + (tmp / "red/manifest.csv") +
              " --models " + (tmp / "models") + " --format csv --out " +
              (tmp / "emb.csv")) == 0);
  CHECK(fs::exists(tmp.root / "emb.csv"));

  // train-svm with C table and final refit
  REQUIRE(run("train-svm --embeddings " + (tmp / "emb.emb1") + " --manifest " +
              (tmp / "red/manifest.csv") + " --config " + cfg_path +
              " --out " + (tmp / "model.svm1") + " --c-table " +
              (tmp / "ctable.csv") + " --final-refit") == 0);
  const auto model = svm::read_svm(tmp.root / "model.svm1");
  CHECK(model.support_vectors.size() > 0);
  {
    std::ifstream is(tmp.root / "ctable.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "c,dev_uar");
    int rows = 0;
    std::string line;
    while (std::getline(is, line))
      if (!line.empty()) ++rows;
    CHECK(rows == 7);
  }

  // predict with UAR report
  REQUIRE(run("predict --model " + (tmp / "model.svm1") + " --embeddings " +
              (tmp / "emb.emb1") + " --manifest " +
              (tmp / "red/manifest.csv") + " --out " + (tmp / "pred.csv")) ==
          0);
  {
    std::ifstream is(tmp.root / "pred.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "id,label,margin");
  }

  // run-experiment + plot-data
  REQUIRE(run("run-experiment --manifest " + (tmp / "data/manifest.csv") +
              " --config " + cfg_path + " --out " + (tmp / "exp") +
              " --seed 5") == 0);
  CHECK(fs::exists(tmp.root / "exp" / "report.txt"));
  REQUIRE(run("plot-data --experiment " + (tmp / "exp") + " --out " +
              (tmp / "plot.csv")) == 0);
  {
    std::ifstream is(tmp.root / "plot.csv");
    std::string header;
    std::getline(is, header);
    CHECK(header == "file,epoch,metric,value");
  }
}

TEST_CASE("idempotence: re-running extract rewrites identical bytes") {
  TempTree tmp;
  const std::string cfg_path = tmp / "tiny.cfg";
  {
    std::ofstream os(cfg_path);
    os << kTinyConfig;
  }
  REQUIRE(run("synth-data --config " + cfg_path + " --out " + (tmp / "data") +
              " --seed 9") == 0);
  REQUIRE(run("extract --manifest " + (tmp / "data/manifest.csv") +
              " --config " + cfg_path + " --geometry reduced --out " +
              (tmp / "e1")) == 0);
  auto first = [&] {
    std::ifstream is(tmp.root / "e1" / "spg" / "synth_train_0000.spg",
                     std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  }();
  REQUIRE(run("extract --manifest " + (tmp / "data/manifest.csv") +
              " --config " + cfg_path + " --geometry reduced --out " +
              (tmp / "e1")) == 0);
  auto second = [&] {
    std::ifstream is(tmp.root / "e1" / "spg" / "synth_train_0000.spg",
                     std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(is), {});
  }();
  CHECK(first == second);
}
