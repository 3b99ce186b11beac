#include <cmath>

#include "doctest.h"
#include "ocl/checkpoint.hpp"
#include "ocl/errors.hpp"
#include "ocl/io.hpp"
#include "ocl/model.hpp"
#include "support.hpp"

using namespace ocl;

namespace {

NormStats simple_stats(std::size_t modalities, std::size_t rois) {
  NormStats s;
  for (std::size_t t = 0; t < modalities; ++t) {
    s.mean.emplace_back(rois, 1.0 + t);
    s.stddev.emplace_back(rois, 2.0 + t);
  }
  return s;
}

Checkpoint small_checkpoint(const Manifest& m, std::uint64_t seed) {
  Rng rng(seed);
  Checkpoint c;
  c.manifest_sha = m.fingerprint();
  c.hparams.hidden_width = 6;
  c.hparams.embedding_dim = 4;
  c.hparams.seed = seed;
  c.encoder = Encoder(m.num_rois, 6, 4, rng);
  c.encoder.stats = simple_stats(m.num_modalities(), m.num_rois);
  c.decoder = Decoder(4, m.num_modalities(), 6, m.num_rois, rng);
  c.classifier = DomainClassifier(4, 6, m.num_modalities(), rng);
  return c;
}

Manifest small_manifest() {
  Manifest m;
  m.modalities = {"A", "B", "C"};
  m.labels = {"x", "y"};
  m.num_rois = 5;
  return m;
}

}  // namespace

TEST_CASE("glorot initialization bounds") {
  Rng rng(1);
  DenseLayer layer = DenseLayer::glorot("l", 30, 50, rng);
  const double limit = std::sqrt(6.0 / 80.0);
  double sq = 0.0;
  for (double w : layer.weight.value.values()) {
    CHECK(std::abs(w) <= limit);
    sq += w * w;
  }
  // Uniform(-a, a) has variance a^2 / 3.
  CHECK(sq / 1500.0 == doctest::Approx(limit * limit / 3.0).epsilon(0.1));
  CHECK(layer.bias.value == Matrix(1, 50));
  CHECK(layer.weight.decay);
  CHECK_FALSE(layer.bias.decay);
  CHECK(layer.weight.name == "l.weight");
}

TEST_CASE("mlp forward matches the eager path") {
  Rng rng(2);
  std::vector<std::size_t> widths{5, 7, 3};
  Mlp net("net", widths, rng);
  CHECK(net.layers().size() == 2);
  CHECK(net.layers()[1].weight.name == "net.layer2.weight");
  Matrix x = test::random_matrix(rng, 4, 5);
  Tape tape;
  CHECK(tape.value(net.forward(tape, tape.constant(x))) == net.apply(x));
  Matrix by_hand = affine(relu(affine(x, net.layers()[0].weight.value, net.layers()[0].bias.value)),
                          net.layers()[1].weight.value, net.layers()[1].bias.value);
  CHECK(test::max_abs_diff(net.apply(x), by_hand) < 1e-14);
  CHECK(net.parameters().size() == 4);

  std::vector<DenseLayer> mismatched{DenseLayer::glorot("a", 3, 4, rng),
                                     DenseLayer::glorot("b", 5, 2, rng)};
  CHECK_THROWS_AS(Mlp(std::move(mismatched)), DimensionError);
}

TEST_CASE("normalization round trip") {
  NormStats s = simple_stats(2, 3);
  std::vector<double> raw{4.0, -1.0, 0.5};
  auto z = s.standardize(raw, 1);
  CHECK(z[0] == doctest::Approx((4.0 - 2.0) / 3.0));
  auto back = s.destandardize(z, 1);
  for (std::size_t q = 0; q < 3; ++q) CHECK(back[q] == doctest::Approx(raw[q]));
  std::vector<double> wrong(2);
  CHECK_THROWS_AS(s.standardize(wrong, 0), DimensionError);
}

TEST_CASE("encoder produces unit embeddings and validates input") {
  Rng rng(3);
  Encoder e(5, 8, 4, rng);
  e.stats = simple_stats(3, 5);
  Matrix x = test::random_matrix(rng, 6, 5);
  std::vector<std::size_t> mods{0, 1, 2, 0, 1, 2};
  Matrix z = e.encode(x, mods);
  for (std::size_t r = 0; r < z.rows(); ++r) {
    double n = 0.0;
    for (double v : z.row(r)) n += v * v;
    CHECK(n == doctest::Approx(1.0));
  }
  // One network for every modality: the id only selects statistics.
  std::vector<std::size_t> other{2, 2, 2, 2, 2, 2};
  CHECK(e.encode(x, other) == z);
  std::vector<std::size_t> bad{0, 1, 2, 3, 0, 0};
  CHECK_THROWS_AS(e.encode(x, bad), LabelError);
  Matrix nan = x;
  nan(0, 0) = NAN;
  CHECK_THROWS_AS(e.encode(nan, mods), NumericError);
  CHECK(e.embedding_dim() == 4);
  CHECK(e.hidden_width() == 8);
}

TEST_CASE("decoder conditions on the target modality") {
  Rng rng(4);
  Decoder d(4, 3, 8, 5, rng);
  Matrix z = test::random_unit_rows(rng, 2, 4);
  Matrix a = d.decode(z, 0);
  Matrix b = d.decode(z, 1);
  CHECK(a.rows() == 2);
  CHECK(a.cols() == 5);
  CHECK(a != b);
  // The batched form equals per-row conditioning.
  std::vector<std::size_t> mixed{0, 1};
  Matrix m = d.decode(z, mixed);
  for (std::size_t q = 0; q < 5; ++q) {
    CHECK(m(0, q) == doctest::Approx(a(0, q)));
    CHECK(m(1, q) == doctest::Approx(b(1, q)));
  }
  CHECK_THROWS_AS(d.decode(z, std::vector<std::size_t>{0}), DimensionError);
}

TEST_CASE("checkpoint round trip is exact") {
  Manifest m = small_manifest();
  Checkpoint c = small_checkpoint(m, 5);
  const std::string text = checkpoint_to_json(c, m);
  Checkpoint back = checkpoint_from_json(text, m);
  CHECK(checkpoint_to_json(back, m) == text);
  CHECK(back.hparams == c.hparams);
  CHECK(back.encoder.stats == c.encoder.stats);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back.encoder.network().layers()[i].weight.value ==
          c.encoder.network().layers()[i].weight.value);
    CHECK(back.decoder.network().layers()[i].bias.value ==
          c.decoder.network().layers()[i].bias.value);
    CHECK(back.classifier.network().layers()[i].weight.value ==
          c.classifier.network().layers()[i].weight.value);
  }
  Rng rng(6);
  Matrix x = test::random_matrix(rng, 3, 5);
  std::vector<std::size_t> mods{0, 1, 2};
  CHECK(back.encoder.encode(x, mods) == c.encoder.encode(x, mods));

  test::TempDir dir;
  save_checkpoint(c, m, dir / "ck.json");
  CHECK(read_file(dir / "ck.json") == text);
  CHECK(checkpoint_to_json(load_checkpoint(dir / "ck.json", m), m) == text);
  CHECK_THROWS_AS(load_checkpoint(dir / "absent.json", m), MissingArtifactError);
}

TEST_CASE("checkpoint rejects foreign or damaged input") {
  Manifest m = small_manifest();
  Checkpoint c = small_checkpoint(m, 7);
  const std::string text = checkpoint_to_json(c, m);
  Manifest other = m;
  other.labels = {"x", "z"};
  CHECK_THROWS_AS(checkpoint_from_json(text, other), FingerprintError);
  CHECK_THROWS_AS(checkpoint_from_json("{not json", m), ParseError);
  CHECK_THROWS_AS(checkpoint_from_json("{}", m), ParseError);
  std::string versioned = text;
  const auto at = versioned.find("\"version\":1");
  REQUIRE(at != std::string::npos);
  versioned.replace(at, 11, "\"version\":9");
  CHECK_THROWS_AS(checkpoint_from_json(versioned, m), VersionError);
}

TEST_CASE("manifest") {
  Manifest m;
  CHECK_NOTHROW(m.validate());
  CHECK(m.modality_index("FDG") == 2);
  CHECK(m.label_index("AD") == 3);
  CHECK_THROWS_AS(m.label_index("MCI"), ParseError);
  CHECK(Manifest::from_json(m.to_json()) == m);
  CHECK(m.fingerprint() == Manifest(m).fingerprint());
  CHECK(m.fingerprint().size() == 64);
  Manifest changed = m;
  changed.num_rois = 159;
  CHECK(changed.fingerprint() != m.fingerprint());
  Manifest dup = m;
  dup.modalities[1] = "CT";
  CHECK_THROWS_AS(dup.validate(), ConfigError);
  CHECK_THROWS_AS(Manifest::from_json(R"({"bogus": 1})"), ParseError);
}

TEST_CASE("sha256 known vector") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}
