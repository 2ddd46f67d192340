#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "cizsl/cli.hpp"
#include "cizsl/dataio.hpp"
#include "cizsl/training.hpp"

using namespace cizsl;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::path(CIZSL_TEST_TMP) / "cli" / name;
  fs::remove_all(dir);
  fs::create_directories(dir.parent_path());
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int cli(std::vector<std::string> args) { return run_cli(args); }

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "run.json")); }

// Small dataset shared by the cases below.
fs::path small_data() {
  static const fs::path dir = [] {
    const fs::path d = scratch("data");
    REQUIRE(cli({"synth", "--out", d.string(), "--k-seen", "6", "--k-unseen", "3", "--visual-dim", "12",
                 "--semantic-dim", "8", "--samples-per-class", "40"}) == kExitOk);
    return d;
  }();
  return dir;
}

}  // namespace

TEST_CASE("synth writes a loadable dataset and a manifest") {
  const fs::path data = small_data();
  const ZslDataset ds = load_dataset(data);
  CHECK(ds.k_seen() == 6);
  CHECK(ds.k_unseen() == 3);
  const auto m = manifest(data);
  CHECK(m["command"] == "synth");
  CHECK(m["status"] == "ok");
  CHECK(m["seeds"] == nlohmann::json::array({1}));
  CHECK(m["toolkit_version"] == kToolkitVersion);
}

TEST_CASE("exit codes") {
  const fs::path bad = scratch("bad_dims");
  CHECK(cli({"synth", "--out", bad.string(), "--visual-dim", "0"}) == kExitValidation);
  CHECK_FALSE(fs::exists(bad));  // validated before any write

  CHECK(cli({"synth", "--out", bad.string(), "--no-such-flag"}) == kExitValidation);
  CHECK(cli({}) == kExitValidation);
  CHECK(cli({"--help"}) == kExitOk);

  const fs::path missing = scratch("missing");
  CHECK(cli({"train", "--data", (missing / "nope").string(), "--out", missing.string()}) == kExitIo);
  CHECK_FALSE(fs::exists(missing));

  const fs::path ov = scratch("bad_override");
  CHECK(cli({"train", "--data", small_data().string(), "--out", ov.string(), "--set", "loss.mystery=1"}) ==
        kExitValidation);
  CHECK(cli({"train", "--data", small_data().string(), "--out", ov.string(), "--set", "batch_size=0"}) ==
        kExitValidation);
  CHECK_FALSE(fs::exists(ov));

  const fs::path suite = scratch("bad_suite");
  CHECK(cli({"ablate", "--data", small_data().string(), "--suite", "nope", "--out", suite.string()}) ==
        kExitValidation);
  CHECK_FALSE(fs::exists(suite));
}

TEST_CASE("numeric failure exits 3 and marks the run failed") {
  const fs::path out = scratch("numeric");
  CHECK(cli({"train", "--data", small_data().string(), "--out", out.string(), "--steps", "3", "--set", "lr=1e300",
             "--set", "eval_every=1"}) == kExitNumeric);
  const auto m = manifest(out);
  CHECK(m["status"] == "failed");
  CHECK(m["error"].get<std::string>().find("step") != std::string::npos);
  for (const auto& o : m["outputs"]) CHECK(fs::exists(out / o.get<std::string>()));
}

TEST_CASE("output directory falls back to the environment") {
  const fs::path out = scratch("env");
  ::setenv(kOutEnv, out.string().c_str(), 1);
  CHECK(cli({"synth", "--k-seen", "3", "--k-unseen", "2", "--samples-per-class", "5"}) == kExitOk);
  ::unsetenv(kOutEnv);
  CHECK(fs::exists(out / "manifest.json"));
  CHECK(cli({"synth"}) == kExitValidation);
}

TEST_CASE("train with zero steps stores the initialization") {
  const fs::path out = scratch("zero");
  REQUIRE(cli({"train", "--data", small_data().string(), "--out", out.string(), "--steps", "0", "--seed", "4"}) ==
          kExitOk);
  const ZslDataset ds = load_dataset(small_data());
  TrainConfig cfg;
  cfg.seed = 4;
  cfg.n_steps = 0;
  const auto [loaded, loaded_cfg] = load_model(out / "checkpoint");
  const ModelParams init = init_model(ds, cfg);
  REQUIRE(loaded.gen.size() == init.gen.size());
  for (const auto& e : init.gen) {
    const Tensor& t = loaded.gen.at(e.name);
    for (std::size_t i = 0; i < t.size(); ++i) CHECK(t[i] == static_cast<double>(static_cast<float>(e.value[i])));
  }
  CHECK(loaded_cfg.seed == 4);
  CHECK(slurp(out / "history.csv") == "step,loss_g,loss_d,wasserstein,top1,auc,gamma,beta\n");
}

TEST_CASE("lambda flag is echoed in the manifest and repeated runs are byte-identical") {
  const fs::path a = scratch("rep_a"), b = scratch("rep_b");
  for (const auto& out : {a, b})
    REQUIRE(cli({"train", "--data", small_data().string(), "--out", out.string(), "--steps", "6", "--lambda", "0.37",
                 "--set", "eval_every=3", "--set", "batch_size=16"}) == kExitOk);
  CHECK(manifest(a)["config"]["loss"]["lambda_creativity"] == 0.37);
  CHECK(slurp(a / "history.csv") == slurp(b / "history.csv"));
  CHECK(slurp(a / "config.json") == slurp(b / "config.json"));

  const fs::path ea = scratch("eval_a"), eb = scratch("eval_b");
  for (const auto& out : {ea, eb})
    REQUIRE(cli({"eval", "--checkpoint", (a / "checkpoint").string(), "--data", small_data().string(), "--out",
                 out.string(), "--n-generate", "10"}) == kExitOk);
  CHECK(slurp(ea / "eval.csv") == slurp(eb / "eval.csv"));
  CHECK(slurp(ea / "su_curve.csv") == slurp(eb / "su_curve.csv"));
  CHECK(slurp(ea / "eval.csv").rfind("metric,value\ntop1_unseen,", 0) == 0);
}

TEST_CASE("retrieve, sweep and ablate produce their tables") {
  const fs::path tr = scratch("small_train");
  REQUIRE(cli({"train", "--data", small_data().string(), "--out", tr.string(), "--steps", "2", "--set",
               "batch_size=8"}) == kExitOk);
  const fs::path rt = scratch("retrieve");
  REQUIRE(cli({"retrieve", "--checkpoint", (tr / "checkpoint").string(), "--data", small_data().string(), "--out",
               rt.string(), "--fractions", "0.5,1"}) == kExitOk);
  const std::string r = slurp(rt / "retrieval.csv");
  CHECK(r.rfind("fraction,precision_at_k,average_precision\n0.5,", 0) == 0);

  const fs::path sw = scratch("sweep");
  REQUIRE(cli({"sweep", "--data", small_data().string(), "--out", sw.string(), "--steps", "2", "--set", "eval_every=1",
               "--set", "batch_size=8", "--lambda-grid", "0,0.5", "--seeds", "1,2"}) == kExitOk);
  const std::string s = slurp(sw / "sweep.csv");
  CHECK(std::count(s.begin(), s.end(), '\n') == 5);
  CHECK(manifest(sw)["seeds"] == nlohmann::json::array({1, 2}));

  const fs::path ab = scratch("ablate");
  REQUIRE(cli({"ablate", "--data", small_data().string(), "--out", ab.string(), "--suite", "segc", "--steps", "1",
               "--set", "batch_size=8", "--n-generate", "5"}) == kExitOk);
  const std::string t = slurp(ab / "ablation.csv");
  CHECK(t.find("\"CIZSL-v2+SeGC\"") != std::string::npos);

  const fs::path wrong = scratch("wrong_dims");
  const fs::path other = scratch("other_data");
  REQUIRE(cli({"synth", "--out", other.string(), "--visual-dim", "7", "--samples-per-class", "5"}) == kExitOk);
  CHECK(cli({"eval", "--checkpoint", (tr / "checkpoint").string(), "--data", other.string(), "--out",
             wrong.string()}) == kExitValidation);
  CHECK_FALSE(fs::exists(wrong));
}
