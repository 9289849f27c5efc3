#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>

#include "cxnn/checkpoint.hpp"
#include "cxnn/config.hpp"
#include "cxnn/dataset_io.hpp"
#include "cxnn/io.hpp"
#include "cxnn/rng.hpp"

using namespace cxnn;

namespace {

std::string temp_dir() {
  static int counter = 0;
  std::string dir = "cxnn_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++);
  std::filesystem::create_directories(dir);
  return dir;
}

template <typename T>
Tensor<T> random_tensor(Rng& rng, Shape shape) {
  Tensor<T> t(shape);
  for (int64_t i = 0; i < t.size(); ++i) t[i] = static_cast<T>(rng.uniform(-10, 10));
  return t;
}

}  // namespace

TEST_CASE("cxt round trip is bit-identical for every dtype/domain combination") {
  const std::string dir = temp_dir();
  Rng rng(1);

  auto tf = random_tensor<float>(rng, Shape{3, 4, 5});
  save_tensor(dir + "/f32.cxt", tf);
  auto tf2 = load_real_tensor<float>(dir + "/f32.cxt");
  REQUIRE(tf2.shape() == tf.shape());
  for (int64_t i = 0; i < tf.size(); ++i)
    CHECK(std::memcmp(&tf[i], &tf2[i], sizeof(float)) == 0);

  auto td = random_tensor<double>(rng, Shape{2, 7});
  save_tensor(dir + "/f64.cxt", td);
  auto td2 = load_real_tensor<double>(dir + "/f64.cxt");
  for (int64_t i = 0; i < td.size(); ++i)
    CHECK(std::memcmp(&td[i], &td2[i], sizeof(double)) == 0);

  ComplexTensor<float> cf(random_tensor<float>(rng, Shape{4, 4}),
                          random_tensor<float>(rng, Shape{4, 4}));
  save_tensor(dir + "/c32.cxt", cf);
  auto cf2 = load_complex_tensor<float>(dir + "/c32.cxt");
  for (int64_t i = 0; i < cf.size(); ++i) {
    CHECK(cf2.re[i] == cf.re[i]);
    CHECK(cf2.im[i] == cf.im[i]);
  }

  // saving twice produces identical bytes
  save_tensor(dir + "/again.cxt", tf);
  CHECK(read_file_bytes(dir + "/f32.cxt") == read_file_bytes(dir + "/again.cxt"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("cxt error contracts: magic, dtype, truncation with expected length") {
  const std::string dir = temp_dir();
  Rng rng(2);
  save_tensor(dir + "/t.cxt", random_tensor<float>(rng, Shape{4, 4}));
  auto bytes = read_file_bytes(dir + "/t.cxt");

  SUBCASE("bad magic") {
    bytes[0] = 'X';
    CHECK_THROWS_AS(parse_cxt(bytes.data(), bytes.size()), FormatError);
  }
  SUBCASE("dtype mismatch is a format error naming the file") {
    CHECK_THROWS_WITH_AS(load_real_tensor<double>(dir + "/t.cxt"),
                         doctest::Contains("dtype mismatch"), FormatError);
  }
  SUBCASE("domain mismatch") {
    CHECK_THROWS_AS(load_complex_tensor<float>(dir + "/t.cxt"), FormatError);
  }
  SUBCASE("truncated payload names expected vs actual length") {
    std::vector<uint8_t> cut(bytes.begin(), bytes.end() - 7);
    try {
      parse_cxt(cut.data(), cut.size());
      FAIL("expected FormatError");
    } catch (const FormatError& e) {
      const std::string msg = e.what();
      CHECK(msg.find("expected " + std::to_string(bytes.size())) != std::string::npos);
      CHECK(msg.find(std::to_string(cut.size())) != std::string::npos);
    }
  }
  SUBCASE("oversized dims do not allocate") {
    // craft a header claiming 2^60 elements; must throw, not allocate
    std::vector<uint8_t> huge(bytes.begin(), bytes.begin() + 10);
    huge[6] = 1;  // ndim = 1
    huge[7] = huge[8] = huge[9] = 0;
    for (int i = 0; i < 8; ++i) huge.push_back(i == 7 ? 0x10 : 0x00);  // dim = 2^60
    CHECK_THROWS_AS(parse_cxt(huge.data(), huge.size()), FormatError);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("cxt fuzzing: byte mutations either parse or raise FormatError") {
  Rng rng(3);
  ComplexTensor<float> t(random_tensor<float>(rng, Shape{3, 5}),
                         random_tensor<float>(rng, Shape{3, 5}));
  const std::string dir = temp_dir();
  save_tensor(dir + "/fuzz.cxt", t);
  auto base = read_file_bytes(dir + "/fuzz.cxt");
  std::filesystem::remove_all(dir);

  int parsed = 0, rejected = 0;
  for (int iter = 0; iter < 2000; ++iter) {
    auto bytes = base;
    const int mutations = 1 + static_cast<int>(rng.below(4));
    for (int m = 0; m < mutations; ++m) {
      const size_t pos = rng.below(bytes.size());
      bytes[pos] = static_cast<uint8_t>(rng.below(256));
    }
    if (rng.below(8) == 0 && !bytes.empty()) bytes.resize(rng.below(bytes.size()) + 1);
    try {
      parse_cxt(bytes.data(), bytes.size());
      ++parsed;
    } catch (const FormatError&) {
      ++rejected;
    }
  }
  CHECK(parsed + rejected == 2000);
  CHECK(rejected > 0);
}

TEST_CASE("manifest round trip with comments") {
  const std::string dir = temp_dir();
  std::vector<ManifestEntry> entries = {{"images/a.cxt", "2"}, {"images/b.cxt", "masks/b.cxt"}};
  write_manifest(dir + "/manifest.tsv", entries);
  // one line per sample, nothing else
  const auto raw = read_file_bytes(dir + "/manifest.tsv");
  CHECK(std::count(raw.begin(), raw.end(), '\n') == 2);
  auto back = read_manifest(dir + "/manifest.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[0].image == "images/a.cxt");
  CHECK(back[0].target == "2");
  CHECK(back[1].target == "masks/b.cxt");

  // '#' comments and blank lines are skipped on read
  write_file_bytes(dir + "/commented.tsv",
                   {'#', ' ', 'c', '\n', '\n', 'a', '\t', '1', '\n'});
  auto commented = read_manifest(dir + "/commented.tsv");
  REQUIRE(commented.size() == 1);
  CHECK(commented[0].image == "a");

  write_file_bytes(dir + "/bad.tsv", {'a', ' ', 'b', '\n'});
  CHECK_THROWS_AS(read_manifest(dir + "/bad.tsv"), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("dataset save/load preserves images, labels and masks exactly") {
  DatasetSpec spec;
  spec.task = TaskKind::Segmentation;
  spec.samples_per_class = 2;
  spec.height = spec.width = 32;
  auto data = generate(spec);
  const std::string dir = temp_dir();
  const std::string manifest = write_dataset(dir, data, TaskKind::Segmentation);
  auto back = load_dataset(manifest, TaskKind::Segmentation);
  REQUIRE(back.size() == data.size());
  for (size_t i = 0; i < data.size(); ++i) {
    for (int64_t j = 0; j < data[i].image.size(); ++j) {
      CHECK(back[i].image[j] == data[i].image[j]);
      CHECK(back[i].mask[j] == data[i].mask[j]);
    }
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("config: defaults, parsing, errors with line numbers") {
  RunConfig def;
  CHECK(def.epochs == 80);
  CHECK(def.batch_size == 64);
  CHECK(def.lr == doctest::Approx(1e-4));
  CHECK(def.seed == 42);
  CHECK(def.effective_folds() == 5);

  RunConfig seg = parse_config_text("task = segmentation\narch = unet\n");
  CHECK(seg.effective_folds() == 3);
  CHECK(seg.task_kind() == TaskKind::Segmentation);

  const std::string text =
      "# comment\n"
      "task = classification\n"
      "arch = resnet34   # trailing comment\n"
      "epochs = 12\n"
      "lr = 0.001\n"
      "augment = false\n";
  RunConfig c = parse_config_text(text, "test.cfg");
  CHECK(c.arch == "resnet34");
  CHECK(c.epochs == 12);
  CHECK(c.lr == doctest::Approx(0.001));
  CHECK(c.augment == false);

  try {
    parse_config_text("task = classification\nbogus_key = 1\n", "test.cfg");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("test.cfg:2") != std::string::npos);
    CHECK(msg.find("bogus_key") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_config_text("epochs = twelve\n"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("task = regression\n"), ConfigError);
}

TEST_CASE("config: parse -> emit -> parse is the identity") {
  RunConfig c = parse_config_text(
      "task = segmentation\narch = attention_unet\nbase_width = 8\ndepth = \n"
      "num_classes = 1\nepochs = 7\nlr = 0.0005\nseed = 9\naugment = false\n"
      "variants = cnn,cvcnn\nwiden_literal = true\n");
  const std::string emitted = emit_config(c);
  RunConfig back = parse_config_text(emitted);
  CHECK(emit_config(back) == emitted);
  CHECK(back.arch == "attention_unet");
  CHECK(back.lr == doctest::Approx(0.0005));
  CHECK(back.widen_literal == true);
  CHECK(back.variant_list().size() == 2);

  // every key documented
  const auto& docs = config_key_docs();
  for (const auto& d : docs) CHECK(emitted.find(d.key) != std::string::npos);
}

TEST_CASE("checkpoint: save, reload, bit-identical weights and metadata") {
  ArchSpec spec;
  spec.family = ArchFamily::ResNet18;
  spec.task = TaskKind::Classification;
  spec.base_width = 4;
  spec.depth = {1, 1, 1, 1};
  auto model = build<float>(spec, Variant::complex(), 123);
  const std::string dir = temp_dir();
  save_checkpoint(dir, spec, Variant::complex(), 123, *model);

  auto loaded = load_checkpoint_model<float>(dir + "/checkpoint.txt");
  CHECK(loaded->meta.trainable == model->meta.trainable);
  auto pa = model->parameters();
  auto pb = loaded->parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    for (int64_t j = 0; j < pa[i]->value_re.size(); ++j)
      CHECK(pa[i]->value_re[j] == pb[i]->value_re[j]);
    if (pa[i]->domain == Domain::Complex)
      for (int64_t j = 0; j < pa[i]->value_im.size(); ++j)
        CHECK(pa[i]->value_im[j] == pb[i]->value_im[j]);
  }

  // forward agreement on a fixed input
  Rng rng(5);
  Tensor<float> img(Shape{1, 1, 32, 32});
  for (int64_t i = 0; i < img.size(); ++i) img[i] = static_cast<float>(rng.uniform(0, 1));
  Tape<float> t1, t2;
  Var s1 = model->forward(t1, t1.constant(img), false);
  Var s2 = loaded->forward(t2, t2.constant(img), false);
  for (int64_t i = 0; i < t1.value(s1).size(); ++i)
    CHECK(t1.value(s1)[i] == t2.value(s2)[i]);
  std::filesystem::remove_all(dir);
}

TEST_CASE("pgm/ppm writers produce the exact binary layout") {
  const std::string dir = temp_dir();
  write_pgm(dir + "/m.pgm", {0, 255, 128, 7}, 2, 2);
  auto pgm = read_file_bytes(dir + "/m.pgm");
  const std::string header(pgm.begin(), pgm.begin() + 9);
  CHECK(header == "P5\n2 2\n25");  // "P5\n2 2\n255\n" prefix
  CHECK(pgm.size() == 11 + 4);
  CHECK(pgm[11] == 0);
  CHECK(pgm[12] == 255);

  write_ppm(dir + "/m.ppm", {255, 0, 0, 0, 255, 0, 0, 0, 255, 9, 9, 9}, 2, 2);
  auto ppm = read_file_bytes(dir + "/m.ppm");
  CHECK(ppm.size() == 11 + 12);
  CHECK_THROWS_AS(write_pgm(dir + "/bad.pgm", {1, 2, 3}, 2, 2), ShapeError);
  std::filesystem::remove_all(dir);
}
