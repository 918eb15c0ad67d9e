#include "doctest_torch.hpp"

#include <fstream>
#include <map>
#include <set>

#include <opencv2/imgcodecs.hpp>

#include "common/error.hpp"
#include "corpus/corpus.hpp"
#include "corpus/image_io.hpp"
#include "corpus/manifest.hpp"
#include "fixtures.hpp"

using namespace derm;
using testsupport::TempDir;
namespace fs = std::filesystem;

namespace {

std::string error_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.what();
  }
  return {};
}

DatasetManifest split_manifest(const std::array<std::size_t, 9>& counts, std::size_t test_per_class,
                               std::uint64_t seed) {
  SplitSpec spec;
  spec.test_count_per_class = test_per_class;
  spec.seed = seed;
  auto m = testsupport::counted_manifest(counts);
  if (test_per_class > 0) m = reserve_test_set(m, spec);
  return stratified_split(m, spec);
}

std::size_t count_of(const DatasetManifest& m, DiseaseLabel label, Split split) {
  std::size_t n = 0;
  for (const auto& r : m.records) n += r.label == label && r.split == split;
  return n;
}

}  // namespace

TEST_SUITE("ingest") {
  TEST_CASE("nine folders of ten images give ninety ORIGINAL records") {
    TempDir dir;
    testsupport::write_class_tree(dir.path(), 10, 16);
    const auto result = ingest(dir.path(), LabelMapping::defaults());

    // Directory walk oracle.
    std::map<std::string, std::size_t> walked;
    for (const auto& e : fs::recursive_directory_iterator(dir.path())) {
      if (e.is_regular_file()) ++walked[e.path().parent_path().filename().string()];
    }
    REQUIRE(result.manifest.records.size() == 90);
    CHECK(result.unreadable.empty());
    std::map<std::string, std::size_t> tallied;
    for (const auto& r : result.manifest.records) {
      CHECK(r.origin == Origin::kOriginal);
      CHECK(r.split == Split::kUnassigned);
      CHECK(fs::path(r.path).parent_path().filename().string() == std::string(to_string(r.label)));
      ++tallied[std::string(to_string(r.label))];
    }
    CHECK(tallied == walked);
    CHECK_NOTHROW(validate(result.manifest));
  }

  TEST_CASE("empty directory reports no images found") {
    TempDir dir;
    CHECK(error_of([&] { ingest(dir.path(), LabelMapping::defaults()); }).find("no images found") !=
          std::string::npos);
  }

  TEST_CASE("unmapped folder name is listed") {
    TempDir dir;
    testsupport::write_class_tree(dir.path(), 1, 8);
    fs::create_directories(dir / "Eczema");
    cv::imwrite((dir / "Eczema" / "x.png").string(), testsupport::class_image(0, 0, 8));
    const auto msg = error_of([&] { ingest(dir.path(), LabelMapping::defaults()); });
    CHECK(msg.find("Eczema") != std::string::npos);
  }

  TEST_CASE("clinical spellings map onto canonical labels") {
    const auto m = LabelMapping::defaults();
    CHECK(m.lookup("P. Maculae") == DiseaseLabel::kPigmentedMaculae);
    CHECK(m.lookup("pigmented maculae") == DiseaseLabel::kPigmentedMaculae);
    CHECK(m.lookup("Ulcers") == DiseaseLabel::kUlcer);
    CHECK(m.lookup("wheal") == DiseaseLabel::kWheal);
    CHECK_FALSE(m.lookup("Eczema"));
  }

  TEST_CASE("undecodable files are reported, not ingested") {
    TempDir dir;
    testsupport::write_class_tree(dir.path(), 2, 8);
    std::ofstream(dir / "Acne" / "broken.png") << "not an image";
    const auto result = ingest(dir.path(), LabelMapping::defaults());
    CHECK(result.manifest.records.size() == 18);
    REQUIRE(result.unreadable.size() == 1);
    CHECK(result.unreadable[0].filename() == "broken.png");
  }

  TEST_CASE("labels.tsv sidecar overrides folder names") {
    TempDir dir;
    fs::create_directories(dir / "flat");
    cv::imwrite((dir / "flat" / "a.png").string(), testsupport::class_image(0, 0, 8));
    cv::imwrite((dir / "flat" / "b.png").string(), testsupport::class_image(1, 0, 8));
    std::ofstream(dir / "labels.tsv") << "# path\tlabel\nflat/a.png\tUlcers\nflat/b.png\tP. Maculae\n";
    const auto m = ingest(dir.path(), LabelMapping::defaults()).manifest;
    REQUIRE(m.records.size() == 2);
    CHECK(m.find("flat/a.png")->label == DiseaseLabel::kUlcer);
    CHECK(m.find("flat/b.png")->label == DiseaseLabel::kPigmentedMaculae);
  }

  TEST_CASE("ingest is deterministic") {
    TempDir dir;
    testsupport::write_class_tree(dir.path(), 3, 8);
    CHECK(serialize(ingest(dir.path(), LabelMapping::defaults()).manifest) ==
          serialize(ingest(dir.path(), LabelMapping::defaults()).manifest));
  }
}

TEST_SUITE("manifest") {
  TEST_CASE("serialize and parse round-trip, including awkward characters") {
    auto m = testsupport::counted_manifest({2, 1, 0, 0, 0, 0, 0, 0, 1});
    m.seed = 99;
    m.records[0].path = "/data/with space/and=equals%percent\ttab.png";
    m.records[0].split = Split::kTrain;
    ImageRecord aug = m.records[0];
    aug.id = m.records[0].id + "#aug0";
    aug.path = "/data/a__aug0.png";
    aug.origin = Origin::kAugmented;
    aug.source_id = m.records[0].id;
    aug.transform = "flip=1;rot=3.5;scale=0.9;cx=0.1;cy=0;bright=1.05";
    m.records.push_back(aug);
    const auto text = serialize(m);
    CHECK(parse_manifest(text) == m);
    CHECK(serialize(parse_manifest(text)) == text);
  }

  TEST_CASE("validation rejects broken invariants") {
    auto m = testsupport::counted_manifest({2, 0, 0, 0, 0, 0, 0, 0, 0});
    SUBCASE("duplicate id") {
      m.records[1].id = m.records[0].id;
      CHECK_THROWS_AS(validate(m), Error);
    }
    SUBCASE("augmented test record") {
      m.records[1].origin = Origin::kAugmented;
      m.records[1].source_id = m.records[0].id;
      m.records[1].split = Split::kTest;
      CHECK_THROWS_AS(validate(m), Error);
    }
    SUBCASE("augmented record with a different label than its source") {
      m.records[1].origin = Origin::kAugmented;
      m.records[1].source_id = m.records[0].id;
      m.records[1].label = DiseaseLabel::kWheal;
      m.records[1].split = Split::kTrain;
      CHECK_THROWS_AS(validate(m), Error);
    }
    SUBCASE("original with a source") {
      m.records[1].source_id = "x";
      CHECK_THROWS_AS(validate(m), Error);
    }
  }

  TEST_CASE("save is atomic and load reports missing files") {
    TempDir dir;
    const auto m = testsupport::counted_manifest({1, 1, 1, 1, 1, 1, 1, 1, 1});
    save_manifest(m, dir / "m.tsv");
    CHECK(load_manifest(dir / "m.tsv") == m);
    for (const auto& e : fs::directory_iterator(dir.path())) CHECK(e.path().filename() == "m.tsv");
    try {
      load_manifest(dir / "absent.tsv");
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::kNotFound);
    }
  }
}

TEST_SUITE("distribution") {
  TEST_CASE("empty manifest yields zeros") {
    const auto d = class_distribution(DatasetManifest{});
    for (const auto& c : d) CHECK(c == SplitCounts{});
  }

  TEST_CASE("two TRAIN records per label") {
    auto m = testsupport::counted_manifest({2, 2, 2, 2, 2, 2, 2, 2, 2});
    for (auto& r : m.records) r.split = Split::kTrain;
    const auto d = class_distribution(m);
    for (const auto& c : d) {
      CHECK(c.train == 2);
      CHECK(c.validation == 0);
      CHECK(c.test == 0);
    }
  }

  TEST_CASE("clinical-scale Acne row is reported back") {
    DatasetManifest m;
    auto add = [&](Split s, std::size_t n) {
      for (std::size_t i = 0; i < n; ++i) {
        ImageRecord r;
        r.id = std::string(to_string(s)) + std::to_string(i);
        r.path = r.id;
        r.split = s;
        m.records.push_back(r);
      }
    };
    add(Split::kTrain, 4215);
    add(Split::kValidation, 446);
    add(Split::kTest, 74);
    const auto acne = class_distribution(m)[index_of(DiseaseLabel::kAcne)];
    CHECK(acne.train == 4215);
    CHECK(acne.validation == 446);
    CHECK(acne.test == 74);
    CHECK(acne.total() == m.records.size());
    CHECK(render_distribution(class_distribution(m)).find("Acne") != std::string::npos);
  }
}

TEST_SUITE("split") {
  TEST_CASE("reserve_test_set takes exactly n originals per class") {
    SplitSpec spec;
    spec.test_count_per_class = 58;
    spec.seed = 3;
    const auto m = reserve_test_set(testsupport::counted_manifest({60, 61, 70, 58, 80, 90, 100, 65, 59}), spec);
    std::size_t test = 0;
    for (auto label : kAllLabels) {
      CHECK(count_of(m, label, Split::kTest) == 58);
      test += count_of(m, label, Split::kTest);
    }
    CHECK(test == 522);
  }

  TEST_CASE("zero test reservation changes nothing") {
    const auto m = testsupport::counted_manifest({5, 5, 5, 5, 5, 5, 5, 5, 5});
    SplitSpec spec;
    spec.test_count_per_class = 0;
    const auto out = reserve_test_set(m, spec);
    CHECK((out.records == m.records));
  }

  TEST_CASE("test reservation is seeded") {
    SplitSpec spec;
    spec.test_count_per_class = 5;
    spec.seed = 11;
    const auto base = testsupport::counted_manifest({20, 20, 20, 20, 20, 20, 20, 20, 20});
    auto ids = [](const DatasetManifest& m) {
      std::set<std::string> s;
      for (const auto& r : m.records) {
        if (r.split == Split::kTest) s.insert(r.id);
      }
      return s;
    };
    CHECK(ids(reserve_test_set(base, spec)) == ids(reserve_test_set(base, spec)));
    auto other = spec;
    other.seed = 12;
    CHECK(ids(reserve_test_set(base, spec)) != ids(reserve_test_set(base, other)));
  }

  TEST_CASE("insufficient originals name the class") {
    SplitSpec spec;
    spec.test_count_per_class = 10;
    const auto m = testsupport::counted_manifest({20, 20, 20, 20, 20, 20, 9, 20, 20});
    CHECK(error_of([&] { reserve_test_set(m, spec); }).find("Pustule") != std::string::npos);
  }

  TEST_CASE("stratified split counts follow round-half-up") {
    CHECK(rounded_share(1000, 0.1) == 100);
    CHECK(rounded_share(995, 0.1) == 100);
    CHECK(rounded_share(994, 0.1) == 99);
    CHECK(rounded_share(4661, 0.1) == 466);
    CHECK(rounded_share(5, 0.1) == 1);
    CHECK(rounded_share(4, 0.1) == 0);

    const auto m = split_manifest({1000, 995, 4661, 2, 0, 0, 0, 0, 0}, 0, 5);
    CHECK(count_of(m, DiseaseLabel::kAcne, Split::kTrain) == 900);
    CHECK(count_of(m, DiseaseLabel::kAcne, Split::kValidation) == 100);
    CHECK(count_of(m, DiseaseLabel::kAlopecia, Split::kTrain) == 895);
    CHECK(count_of(m, DiseaseLabel::kAlopecia, Split::kValidation) == 100);
    // 4215/446 is not an exact 90:10 of 4661; round half up gives 466.
    CHECK(count_of(m, DiseaseLabel::kCrust, Split::kTrain) == 4195);
    CHECK(count_of(m, DiseaseLabel::kCrust, Split::kValidation) == 466);
  }

  TEST_CASE("a class with one non-test record is rejected") {
    CHECK_THROWS_AS(split_manifest({10, 1, 0, 0, 0, 0, 0, 0, 0}, 0, 0), Error);
  }

  TEST_CASE("every record ends in exactly one split and TEST is untouched") {
    const auto m = split_manifest({30, 31, 32, 33, 34, 35, 36, 37, 38}, 7, 42);
    for (const auto& r : m.records) CHECK(r.split != Split::kUnassigned);
    SplitSpec spec;
    spec.test_count_per_class = 7;
    spec.seed = 42;
    const auto reserved = reserve_test_set(testsupport::counted_manifest({30, 31, 32, 33, 34, 35, 36, 37, 38}), spec);
    for (std::size_t i = 0; i < m.records.size(); ++i) {
      CHECK((m.records[i].split == Split::kTest) == (reserved.records[i].split == Split::kTest));
    }
  }

  TEST_CASE("split is reproducible byte for byte") {
    CHECK(serialize(split_manifest({40, 41, 42, 43, 44, 45, 46, 47, 48}, 4, 7)) ==
          serialize(split_manifest({40, 41, 42, 43, 44, 45, 46, 47, 48}, 4, 7)));
    CHECK(serialize(split_manifest({40, 41, 42, 43, 44, 45, 46, 47, 48}, 4, 7)) !=
          serialize(split_manifest({40, 41, 42, 43, 44, 45, 46, 47, 48}, 4, 8)));
  }
}

TEST_SUITE("augment") {
  DatasetManifest small_split_corpus(const fs::path& root, std::size_t per_class) {
    auto m = testsupport::ingested_tree(root, per_class, 16);
    for (auto& r : m.records) r.split = Split::kTrain;
    return m;
  }

  TEST_CASE("classes already at target gain nothing") {
    TempDir dir;
    const auto m = small_split_corpus(dir / "c", 4);
    AugmentationPlan plan;
    plan.target_per_class = 4;
    AugmentReport report;
    const auto out = augment_to_target(m, plan, &report);
    CHECK(report.total_added() == 0);
    CHECK(out == m);
  }

  TEST_CASE("half-full classes are doubled with valid sources") {
    TempDir dir;
    const auto m = small_split_corpus(dir / "c", 3);
    AugmentationPlan plan;
    plan.target_per_class = 6;
    plan.seed = 5;
    plan.output_dir = dir / "aug";
    AugmentReport report;
    const auto out = augment_to_target(m, plan, &report);
    CHECK(report.total_added() == 27);
    CHECK_NOTHROW(validate(out));
    for (auto label : kAllLabels) CHECK(count_of(out, label, Split::kTrain) == 6);
    for (const auto& r : out.records) {
      if (r.origin != Origin::kAugmented) continue;
      REQUIRE(r.source_id);
      const auto* src = out.find(*r.source_id);
      REQUIRE(src);
      CHECK(src->origin == Origin::kOriginal);
      CHECK(src->label == r.label);
      CHECK(fs::exists(r.path));
      CHECK(fs::path(r.path).parent_path() == dir / "aug" / std::string(to_string(r.label)));
      CHECK_NOTHROW(AugmentTransform::parse(r.transform));
    }
  }

  TEST_CASE("augmentation is seeded, including pixels") {
    TempDir a, b;
    const auto ma = small_split_corpus(a / "c", 2);
    const auto mb = small_split_corpus(b / "c", 2);
    AugmentationPlan plan;
    plan.target_per_class = 4;
    plan.seed = 9;
    const auto oa = augment_to_target(ma, plan);
    const auto ob = augment_to_target(mb, plan);
    REQUIRE(oa.records.size() == ob.records.size());
    for (std::size_t i = 0; i < oa.records.size(); ++i) {
      CHECK(oa.records[i].id == ob.records[i].id);
      CHECK(oa.records[i].transform == ob.records[i].transform);
      if (oa.records[i].origin == Origin::kAugmented) {
        const auto ia = decode_image_file(oa.records[i].path);
        const auto ib = decode_image_file(ob.records[i].path);
        CHECK(cv::norm(ia, ib, cv::NORM_INF) == 0);
      }
    }
  }

  TEST_CASE("a class without originals in train is an error") {
    TempDir dir;
    auto m = small_split_corpus(dir / "c", 2);
    for (auto& r : m.records) {
      if (r.label == DiseaseLabel::kWheal) r.split = Split::kValidation;
    }
    AugmentationPlan plan;
    plan.target_per_class = 3;
    CHECK(error_of([&] { augment_to_target(m, plan); }).find("Wheal") != std::string::npos);
  }

  TEST_CASE("unassigned records must be split first") {
    TempDir dir;
    auto m = testsupport::ingested_tree(dir / "c", 2, 8);
    AugmentationPlan plan;
    plan.target_per_class = 3;
    CHECK_THROWS_AS(augment_to_target(m, plan), Error);
  }

  TEST_CASE("identity transform leaves the image unchanged; sampled ones stay in range") {
    const auto img = testsupport::class_image(2, 1, 32);
    CHECK(cv::norm(apply_transform(img, AugmentTransform{}), img, cv::NORM_INF) == 0);
    AugmentationOps ops;
    SeededRng rng(1, 2);
    for (int i = 0; i < 200; ++i) {
      const auto t = sample_transform(ops, rng);
      CHECK(std::abs(t.rotation_degrees) <= 20.0);
      CHECK(t.crop_scale >= 0.8);
      CHECK(t.crop_scale <= 1.0);
      CHECK(t.brightness >= 0.9);
      CHECK(t.brightness <= 1.1);
      const auto back = AugmentTransform::parse(t.to_string());
      CHECK(back.to_string() == t.to_string());
      const auto out = apply_transform(img, t);
      CHECK(out.size() == img.size());
      CHECK(out.type() == img.type());
    }
  }
}

TEST_SUITE("kfold") {
  DatasetManifest trainval(const std::array<std::size_t, 9>& counts) {
    auto m = testsupport::counted_manifest(counts);
    for (std::size_t i = 0; i < m.records.size(); ++i) m.records[i].split = i % 3 ? Split::kTrain : Split::kValidation;
    return m;
  }

  TEST_CASE("100 records of one class split into five folds of 20") {
    const auto folds = kfold_partitions(trainval({100, 0, 0, 0, 0, 0, 0, 0, 0}), 5, 1);
    REQUIRE(folds.size() == 5);
    std::set<std::size_t> all;
    for (const auto& f : folds) {
      CHECK(f.size() == 20);
      all.insert(f.begin(), f.end());
    }
    CHECK(all.size() == 100);
  }

  TEST_CASE("test records never enter a fold") {
    auto m = trainval({10, 10, 10, 10, 10, 10, 10, 10, 10});
    m.records[0].split = Split::kTest;
    for (const auto& f : kfold_partitions(m, 3, 0)) {
      CHECK(std::find(f.begin(), f.end(), 0) == f.end());
    }
  }

  TEST_CASE("k larger than a class and k below 2 are errors") {
    CHECK_THROWS_AS(kfold_partitions(trainval({4, 5, 5, 5, 5, 5, 5, 5, 5}), 5, 0), Error);
    CHECK_THROWS_AS(kfold_partitions(trainval({5, 5, 5, 5, 5, 5, 5, 5, 5}), 1, 0), Error);
  }

  TEST_CASE("partitions are seeded") {
    const auto m = trainval({12, 13, 14, 15, 16, 17, 18, 19, 20});
    CHECK(kfold_partitions(m, 4, 3) == kfold_partitions(m, 4, 3));
    CHECK(kfold_partitions(m, 4, 3) != kfold_partitions(m, 4, 4));
  }
}
