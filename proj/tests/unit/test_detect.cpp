#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "balltrack/detect.hpp"
#include "balltrack/synth.hpp"
#include "doctest.h"
#include "support/fixtures.hpp"
#include "support/oracles.hpp"

using namespace balltrack;

namespace {

ColorImage random_image(int w, int h, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  ColorImage img(w, h);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) img.set(r, c, u(rng), u(rng), u(rng));
  }
  return img;
}

ConvUnit random_unit(std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 0.5);
  ConvUnit unit;
  for (double& w : unit.weights) w = g(rng);
  unit.bias = g(rng);
  return unit;
}

const ConvUnit& trained_unit() {
  static const ConvUnit unit = [] {
    std::vector<LabeledImage> data;
    for (auto& item : generate_disk_corpus(CorpusConfig{})) data.push_back(item.labeled);
    return train(data, TrainParams{});
  }();
  return unit;
}

}  // namespace

TEST_SUITE("detect") {
  TEST_CASE("zero weights give sigmoid of the bias everywhere") {
    std::mt19937_64 rng(1);
    const ColorImage img = random_image(8, 6, rng);
    ConvUnit unit;
    const ProbabilityImage even = infer(img, unit);
    for (double v : even.values()) CHECK(v == 0.5);
    unit.bias = -10.0;
    const ProbabilityImage low = infer(img, unit);
    for (double v : low.values()) CHECK(v < 1e-4);
  }

  TEST_CASE("inference matches a nested-loop correlation") {
    std::mt19937_64 rng(2);
    for (int k = 0; k < 5; ++k) {
      const ColorImage img = random_image(16, 16, rng);
      const ConvUnit unit = random_unit(rng);
      const ProbabilityImage got = infer(img, unit);
      const ProbabilityImage want = oracle::infer(img, unit);
      for (std::size_t i = 0; i < got.values().size(); ++i) {
        CHECK(std::abs(got.values()[i] - want.values()[i]) < 1e-12);
      }
    }
  }

  TEST_CASE("weight layout puts the channel innermost") {
    CHECK(ConvUnit::index(-2, -2, 0) == 0);
    CHECK(ConvUnit::index(-2, -2, 2) == 2);
    CHECK(ConvUnit::index(-2, -1, 0) == 3);
    CHECK(ConvUnit::index(-1, -2, 0) == 15);
    CHECK(ConvUnit::index(2, 2, 2) == 74);
  }

  TEST_CASE("an all-zero map has no object") {
    DetectorConfig cfg;
    cfg.t_high = 0.5;
    CHECK_FALSE(find_object_pixels(ProbabilityImage(10, 10), cfg));
  }

  TEST_CASE("a lone bright pixel is its own region") {
    ProbabilityImage prob(9, 7);
    prob.at(3, 5) = 0.9;
    const auto region = find_object_pixels(prob, DetectorConfig{});
    REQUIRE(region);
    CHECK(region->pixels.size() == 1);
    CHECK(region->centroid == Pixel{5.0, 3.0});
  }

  TEST_CASE("only the blob holding the maximum is returned") {
    ProbabilityImage prob(20, 10);
    for (int r = 2; r <= 4; ++r) {
      for (int c = 2; c <= 4; ++c) prob.at(r, c) = 0.90;
    }
    for (int r = 5; r <= 7; ++r) {
      for (int c = 13; c <= 15; ++c) prob.at(r, c) = 0.95;
    }
    const auto region = find_object_pixels(prob, DetectorConfig{});
    REQUIRE(region);
    const auto mask = oracle::component(prob, {6, 14}, 0.3, 8);
    CHECK(region->pixels.size() == 9);
    for (const auto& [r, c] : region->pixels) CHECK(mask[r][c]);
    CHECK(region->centroid.u == doctest::Approx(14.0));
    CHECK(region->centroid.v == doctest::Approx(6.0));
  }

  TEST_CASE("ties in the maximum go to the first pixel in row-major order") {
    ProbabilityImage prob(6, 6);
    prob.at(4, 1) = 0.9;
    prob.at(1, 4) = 0.9;
    const auto region = find_object_pixels(prob, DetectorConfig{});
    REQUIRE(region);
    CHECK(region->pixels.front() == std::pair{1, 4});
  }

  TEST_CASE("diagonal neighbors join only under 8-connectivity") {
    ProbabilityImage prob(5, 5);
    prob.at(2, 2) = 0.9;
    prob.at(3, 3) = 0.5;
    DetectorConfig cfg;
    CHECK(find_object_pixels(prob, cfg)->pixels.size() == 2);
    cfg.connectivity = 4;
    CHECK(find_object_pixels(prob, cfg)->pixels.size() == 1);
  }

  TEST_CASE("region matches reachability on random maps") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int k = 0; k < 300; ++k) {
      const int w = 3 + static_cast<int>(u(rng) * 20), h = 3 + static_cast<int>(u(rng) * 20);
      ProbabilityImage prob(w, h);
      for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) prob.at(r, c) = u(rng) < 0.5 ? u(rng) : 0.0;
      }
      DetectorConfig cfg;
      cfg.connectivity = k % 2 ? 4 : 8;
      const auto region = find_object_pixels(prob, cfg);
      const auto seed = oracle::argmax(prob);
      const double peak = prob.at(seed.first, seed.second);
      REQUIRE(region.has_value() == (peak >= cfg.t_high));
      if (!region) continue;
      const auto mask = oracle::component(prob, seed, cfg.t_low, cfg.connectivity);
      std::size_t expected = 0;
      for (const auto& row : mask) expected += static_cast<std::size_t>(std::count(row.begin(), row.end(), 1));
      CHECK(region->pixels.size() == expected);
      std::set<std::pair<int, int>> unique(region->pixels.begin(), region->pixels.end());
      CHECK(unique.size() == region->pixels.size());
      for (const auto& [r, c] : region->pixels) CHECK(mask[r][c]);
    }
  }

  TEST_CASE("work is linear in the image and region size") {
    ProbabilityImage prob(30, 20);
    for (int r = 5; r < 10; ++r) {
      for (int c = 5; c < 12; ++c) prob.at(r, c) = 0.9;
    }
    RegionStats stats;
    const auto region = find_object_pixels(prob, DetectorConfig{}, &stats);
    REQUIRE(region);
    CHECK(stats.argmax_visits == 600);
    CHECK(stats.bfs_pops == 35);
    CHECK(stats.neighbor_checks <= 8 * 35);
  }

  TEST_CASE("threshold and size validation") {
    DetectorConfig cfg;
    cfg.t_low = 0.9;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = DetectorConfig{};
    cfg.connectivity = 6;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(ColorImage(0, 3), std::invalid_argument);
  }

  TEST_CASE("gradient matches central differences") {
    std::mt19937_64 rng(4);
    std::vector<LabeledImage> data;
    for (int k = 0; k < 3; ++k) {
      LabeledImage li{random_image(12, 10, rng), std::nullopt};
      if (k != 1) li.bbox = BBox{3, 3, 5, 6};
      data.push_back(std::move(li));
    }
    const auto samples = build_training_samples(data, 9);
    ConvUnit unit = random_unit(rng);
    for (double& w : unit.weights) w *= 0.2;
    const auto grad = cross_entropy_gradient(unit, samples);
    const double h = 1e-5;
    for (int i = 0; i <= kFilterWeights; ++i) {
      ConvUnit plus = unit, minus = unit;
      double& p = i < kFilterWeights ? plus.weights[i] : plus.bias;
      double& m = i < kFilterWeights ? minus.weights[i] : minus.bias;
      p += h;
      m -= h;
      const double numeric =
          (mean_cross_entropy(plus, samples) - mean_cross_entropy(minus, samples)) / (2 * h);
      CHECK(std::abs(numeric - grad[i]) <= 1e-4 * std::max(1.0, std::abs(numeric)));
    }
  }

  TEST_CASE("sample set holds every box pixel and ten negatives per positive") {
    std::mt19937_64 rng(5);
    std::vector<LabeledImage> data{{random_image(20, 20, rng), BBox{2, 2, 4, 5}}};
    const auto samples = build_training_samples(data, 1);
    int pos = 0, neg = 0;
    for (const auto& s : samples) {
      if (s.label == 1.0) {
        ++pos;
        CHECK(data[0].bbox->contains(s.row, s.col));
      } else {
        ++neg;
        CHECK_FALSE(data[0].bbox->contains(s.row, s.col));
      }
    }
    CHECK(pos == 12);
    CHECK(neg == 120);
  }

  TEST_CASE("zero epochs returns the initialization") {
    std::mt19937_64 rng(6);
    std::vector<LabeledImage> data{{random_image(20, 20, rng), BBox{2, 2, 4, 5}}};
    TrainParams params;
    params.epochs = 0;
    params.seed = 42;
    const ConvUnit unit = train(data, params);
    const ConvUnit init = initial_unit(42);
    CHECK(unit.weights == init.weights);
    CHECK(unit.bias == init.bias);
  }

  TEST_CASE("no positive boxes is a training error") {
    std::mt19937_64 rng(7);
    std::vector<LabeledImage> data{{random_image(20, 20, rng), std::nullopt}};
    CHECK_THROWS_AS(train(data, TrainParams{}), TrainError);
  }

  TEST_CASE("huge learning rate diverges") {
    std::vector<LabeledImage> data;
    for (auto& item : generate_disk_corpus(CorpusConfig{20, 96, 72, 0.5, 2.5, 6.0, 3})) {
      data.push_back(item.labeled);
    }
    TrainParams params;
    params.learning_rate = 1e6;
    try {
      train(data, params);
      FAIL("expected divergence");
    } catch (const TrainError& e) {
      CHECK(e.kind() == TrainError::Kind::kDiverged);
    }
  }

  TEST_CASE("separable disks drive the loss down") {
    // Flat orange disks on flat gray with no pixel noise.
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<LabeledImage> data;
    for (int k = 0; k < 40; ++k) {
      ColorImage img(48, 40);
      for (int r = 0; r < 40; ++r) {
        for (int c = 0; c < 48; ++c) img.set(r, c, 0.5, 0.5, 0.5);
      }
      LabeledImage li{img, std::nullopt};
      if (k % 2 == 0) {
        const Pixel center{12 + 24 * u(rng), 12 + 16 * u(rng)};
        draw_disk(li.image, center, 5.0, kBallColor);
        li.bbox = disk_bbox(center, 5.0, 48, 40);
      }
      data.push_back(std::move(li));
    }
    TrainParams params;
    params.epochs = 40;
    const TrainReport report = train_with_report(data, params);
    CHECK(report.epoch_loss.back() < 0.05);
  }

  TEST_CASE("small learning rate gives a non-increasing loss") {
    std::vector<LabeledImage> data;
    for (auto& item : generate_disk_corpus(CorpusConfig{30, 96, 72, 0.5, 2.5, 6.0, 4})) {
      data.push_back(item.labeled);
    }
    TrainParams params;
    params.learning_rate = 1e-3;
    params.epochs = 8;
    const TrainReport report = train_with_report(data, params);
    double previous = report.initial_loss;
    for (double loss : report.epoch_loss) {
      CHECK(loss <= previous + 1e-12);
      previous = loss;
    }
  }

  TEST_CASE("trained unit finds a disk and ignores a blank frame") {
    const ConvUnit& unit = trained_unit();
    std::mt19937_64 rng(9);
    ColorImage img = render_background(96, 72, rng);
    CHECK_FALSE(detect(img, unit, DetectorConfig{}));
    const Pixel center{40.3, 30.7};
    draw_disk(img, center, 4.5, kBallColor);
    const auto found = detect(img, unit, DetectorConfig{});
    REQUIRE(found);
    CHECK(std::hypot(found->u - center.u, found->v - center.v) <= 2.0);
  }

  TEST_CASE("half-visible disk lands on its visible side") {
    const ConvUnit& unit = trained_unit();
    std::mt19937_64 rng(10);
    ColorImage img = render_background(96, 72, rng);
    draw_disk(img, Pixel{95.0, 30.0}, 5.0, kBallColor);
    const auto found = detect(img, unit, DetectorConfig{});
    REQUIRE(found);
    CHECK(found->u >= 90.0);
    CHECK(found->u <= 95.0);
    CHECK(found->v >= 0.0);
    CHECK(found->v <= 71.0);
  }

  TEST_CASE("netpbm, model and label files round-trip") {
    const auto dir = fixtures::scratch_dir("detect-io");
    std::mt19937_64 rng(11);
    const ColorImage img = random_image(7, 5, rng);
    write_ppm(dir / "a.ppm", img);
    const ColorImage back = read_ppm(dir / "a.ppm");
    REQUIRE(back.width() == 7);
    for (std::size_t i = 0; i < img.data().size(); ++i) {
      CHECK(std::abs(back.data()[i] - img.data()[i]) <= 0.5 / 255.0 + 1e-12);
    }
    ProbabilityImage prob(4, 3, 0.25);
    write_pgm(dir / "p.pgm", prob);
    CHECK(read_pgm(dir / "p.pgm").at(2, 3) == doctest::Approx(64.0 / 255.0));

    const ConvUnit unit = random_unit(rng);
    save_model(dir / "m.json", unit);
    const ConvUnit loaded = load_model(dir / "m.json");
    CHECK(loaded.weights == unit.weights);
    CHECK(loaded.bias == unit.bias);

    const std::vector<LabelRecord> labels{{dir / "a.ppm", BBox{1, 2, 3, 4}}, {dir / "b.ppm", std::nullopt}};
    save_labels(dir / "labels.txt", labels);
    const auto read = load_labels(dir / "labels.txt");
    REQUIRE(read.size() == 2);
    CHECK(read[0].image == dir / "a.ppm");
    CHECK(read[0].bbox == labels[0].bbox);
    CHECK_FALSE(read[1].bbox);
  }

  TEST_CASE("malformed files are reported") {
    const auto dir = fixtures::scratch_dir("detect-bad");
    std::ofstream(dir / "bad.ppm") << "P3\n2 2\n255\n";
    CHECK_THROWS_AS(read_ppm(dir / "bad.ppm"), FormatError);
    std::ofstream(dir / "short.ppm") << "P6\n4 4\n255\nabc";
    CHECK_THROWS_AS(read_ppm(dir / "short.ppm"), FormatError);
    CHECK_THROWS_AS(read_ppm(dir / "missing.ppm"), FormatError);
    std::ofstream(dir / "m.json") << R"({"weights":[1,2,3],"bias":0})";
    CHECK_THROWS_AS(load_model(dir / "m.json"), FormatError);
    std::ofstream(dir / "l.txt") << "a.ppm 1 2 3\n";
    CHECK_THROWS_AS(load_labels(dir / "l.txt"), FormatError);
  }
}
