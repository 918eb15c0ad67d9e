#include <doctest.h>
#include <httplib.h>

#include <cmath>
#include <string>
#include <thread>
#include <vector>

#include <dermclass/dermclass.h>

#include "synthetic.hpp"

using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

std::string take(char* s) {
  std::string out = s ? s : "";
  dc_string_free(s);
  return out;
}

struct Config {
  dc_config* handle = nullptr;
  Config() { REQUIRE(dc_config_create(&handle) == DC_OK); }
  ~Config() { dc_config_destroy(handle); }
  void set(const char* key, const std::string& value) { REQUIRE(dc_config_set(handle, key, value.c_str()) == DC_OK); }
};

void small_pipeline(Config& c, const TempDir& dir) {
  testsupport::write_class_tree(dir / "corpus", 6, 32);
  c.set("paths.corpus_dir", (dir / "corpus").string());
  c.set("paths.manifest", (dir / "manifest.tsv").string());
  c.set("paths.checkpoint_dir", (dir / "ckpt").string());
  c.set("paths.runs_dir", (dir / "runs").string());
  c.set("paths.reports_dir", (dir / "reports").string());
  c.set("paths.store_dir", (dir / "store").string());
  c.set("paths.augment_dir", (dir / "aug").string());
  c.set("model.init", "random");
  c.set("model.resize", "32");
  c.set("model.crop", "32");
  c.set("split.test_per_class", "1");
  c.set("train.max_epochs", "1");
  c.set("train.batch_size", "8");
  c.set("train.threads", "1");
}

std::vector<std::string> split_lines(const std::string& s) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start < s.size()) {
    const auto end = s.find('\n', start);
    out.push_back(s.substr(start, end - start));
    if (end == std::string::npos) break;
    start = end + 1;
  }
  return out;
}

}  // namespace

TEST_CASE("static tables") {
  CHECK(std::string(dc_version()).size() > 0);
  REQUIRE(dc_label_count() == 9);
  for (std::size_t i = 0; i < 9; ++i) CHECK(std::string(dc_label_name(i)) == testsupport::kLabelNames[i]);
  CHECK(dc_label_name(9) == nullptr);
  CHECK(std::string(dc_status_name(DC_ERR_CONFLICT)) == "conflict");
  REQUIRE(dc_command_count() == 9);
  for (std::size_t i = 0; i < dc_command_count(); ++i) {
    const std::string name = dc_command_name(i);
    CHECK(std::string(dc_command_semantics(i)) == (name == "serve" ? "append-only" : "idempotent"));
    CHECK(std::string(dc_command_summary(i)).size() > 0);
  }
  CHECK(dc_config_key_count() > 20);
}

TEST_CASE("configuration through the C interface") {
  Config c;
  char* out = nullptr;
  REQUIRE(dc_config_get(c.handle, "train.batch_size", &out) == DC_OK);
  CHECK(take(out) == "16");
  c.set("train.batch_size", "24");
  REQUIRE(dc_config_get(c.handle, "train.batch_size", &out) == DC_OK);
  CHECK(take(out) == "24");

  CHECK(dc_config_set(c.handle, "train.nonsense", "1") == DC_ERR_INVALID_ARGUMENT);
  CHECK(std::string(dc_last_error()).find("train.nonsense") != std::string::npos);
  CHECK(dc_config_get(c.handle, "nope", &out) == DC_ERR_INVALID_ARGUMENT);
  CHECK(dc_config_set(nullptr, "seed", "1") == DC_ERR_INVALID_ARGUMENT);
  CHECK(dc_config_validate(c.handle) == DC_OK);

  REQUIRE(dc_config_digest(c.handle, &out) == DC_OK);
  const auto digest = take(out);
  CHECK(digest.size() == 16);
  REQUIRE(dc_config_canonical_text(c.handle, &out) == DC_OK);
  CHECK(take(out).find("train.batch_size=24") != std::string::npos);

  TempDir dir;
  {
    std::FILE* f = std::fopen((dir / "x.conf").c_str(), "w");
    std::fputs("# override\ntrain.batch_size = 32\n", f);
    std::fclose(f);
  }
  REQUIRE(dc_config_load(c.handle, (dir / "x.conf").c_str()) == DC_OK);
  REQUIRE(dc_config_digest(c.handle, &out) == DC_OK);
  CHECK(take(out) != digest);
  CHECK(dc_config_load(c.handle, (dir / "missing.conf").c_str()) == DC_ERR_NOT_FOUND);
}

TEST_CASE("pipeline, manifest, model and service") {
  TempDir dir;
  Config c;
  small_pipeline(c, dir);
  std::vector<std::string> logged;
  dc_set_log_callback([](void* user, const char* line) { static_cast<std::vector<std::string>*>(user)->push_back(line); },
                      &logged);

  char* out = nullptr;
  REQUIRE(dc_pipeline_run(c.handle, "ingest", &out) == DC_OK);
  CHECK(take(out).find("manifest.tsv") != std::string::npos);
  REQUIRE(dc_pipeline_run(c.handle, "split", nullptr) == DC_OK);
  CHECK_FALSE(logged.empty());
  CHECK(dc_pipeline_run(c.handle, "serve", nullptr) == DC_ERR_INVALID_ARGUMENT);
  CHECK(dc_pipeline_run(c.handle, "launch", nullptr) == DC_ERR_INVALID_ARGUMENT);

  dc_manifest* m = nullptr;
  REQUIRE(dc_manifest_load((dir / "manifest.tsv").c_str(), &m) == DC_OK);
  CHECK(dc_manifest_size(m) == 54);
  std::size_t n = 0;
  REQUIRE(dc_manifest_count(m, "Acne", "TEST", &n) == DC_OK);
  CHECK(n == 1);
  REQUIRE(dc_manifest_count(m, nullptr, "TEST", &n) == DC_OK);
  CHECK(n == 9);
  REQUIRE(dc_manifest_count(m, "Wheal", nullptr, &n) == DC_OK);
  CHECK(n == 6);
  CHECK(dc_manifest_count(m, "Eczema", nullptr, &n) == DC_ERR_INVALID_ARGUMENT);
  REQUIRE(dc_manifest_distribution(m, &out) == DC_OK);
  CHECK(take(out).find("Acne") != std::string::npos);
  dc_manifest_destroy(m);
  CHECK(dc_manifest_load((dir / "absent.tsv").c_str(), &m) == DC_ERR_NOT_FOUND);

  REQUIRE(dc_pipeline_run(c.handle, "train", &out) == DC_OK);
  const auto artifacts = split_lines(take(out));
  REQUIRE_FALSE(artifacts.empty());
  const auto checkpoint = artifacts[0];
  dc_set_log_callback(nullptr, nullptr);

  dc_model* model = nullptr;
  REQUIRE(dc_model_load(checkpoint.c_str(), &model) == DC_OK);
  REQUIRE(dc_model_backbone(model, &out) == DC_OK);
  CHECK(take(out) == "ResNet18");
  REQUIRE(dc_model_digest(model, &out) == DC_OK);
  const auto digest = take(out);
  CHECK(digest.size() > 0);

  double scores[9];
  const auto image = (dir / "corpus" / "Crust" / "img_0.png").string();
  REQUIRE(dc_model_predict_file(model, image.c_str(), scores) == DC_OK);
  double sum = 0.0;
  for (double s : scores) {
    CHECK(s >= 0.0);
    sum += s;
  }
  CHECK(std::abs(sum - 1.0) < 1e-9);
  const auto png = testsupport::encode_png(testsupport::class_image(2, 0, 32));
  double again[9];
  REQUIRE(dc_model_predict_bytes(model, reinterpret_cast<const uint8_t*>(png.data()), png.size(), again) == DC_OK);
  for (std::size_t i = 0; i < 9; ++i) CHECK(again[i] == scores[i]);
  const uint8_t junk[4] = {0, 1, 2, 3};
  CHECK(dc_model_predict_bytes(model, junk, sizeof(junk), again) == DC_ERR_CORRUPT);
  CHECK(dc_model_predict_file(model, (dir / "none.png").c_str(), again) != DC_OK);
  dc_model_destroy(model);
  CHECK(dc_model_load((dir / "none.weights").c_str(), &model) == DC_ERR_NOT_FOUND);

  c.set("service.listen", "127.0.0.1:0");
  c.set("model.checkpoint", checkpoint);
  dc_service* service = nullptr;
  REQUIRE(dc_service_create(c.handle, &service) == DC_OK);
  int port = 0;
  REQUIRE(dc_service_bind(service, &port) == DC_OK);
  CHECK(port > 0);
  std::thread runner([&] { CHECK(dc_service_run(service) == DC_OK); });
  httplib::Client client("127.0.0.1", port);
  httplib::Result health;
  for (int i = 0; i < 100 && !health; ++i) {
    health = client.Get("/health");
    if (!health) std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
  REQUIRE(health);
  CHECK(health->status == 200);
  CHECK(health->body.find(digest) != std::string::npos);
  CHECK(dc_service_stop(service) == DC_OK);
  runner.join();
  dc_service_destroy(service);
}
