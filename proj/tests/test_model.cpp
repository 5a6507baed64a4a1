#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

#include "oracles.hpp"
#include "trailmark/errors.hpp"
#include "trailmark/model.hpp"
#include "trailmark/rng.hpp"

using namespace trailmark;

namespace {

ImageTensor random_tensor(Rng& rng, int w, int h, int c) {
    ImageTensor x(w, h, c);
    for (auto& v : x.data) v = rng.uniform();
    return x;
}

BinaryMask random_mask(Rng& rng, int w, int h) {
    BinaryMask m(w, h);
    for (auto& v : m.data) v = static_cast<std::uint8_t>(rng.uniform_index(2));
    return m;
}

std::vector<TrainSample> constant_dataset(double value, int count, int w, int h, int c) {
    std::vector<TrainSample> dataset;
    for (int i = 0; i < count; ++i)
        dataset.push_back({ImageTensor(w, h, c, value), BinaryMask(w, h, 1)});
    return dataset;
}

}  // namespace

TEST_SUITE("model") {

TEST_CASE("loss vanishes on perfect reconstruction or an empty mask") {
    Rng rng(51);
    const ImageTensor x = random_tensor(rng, 6, 4, 3);
    CHECK(masked_loss(x, x, BinaryMask(6, 4, 1)) == 0.0);
    const ImageTensor other = random_tensor(rng, 6, 4, 3);
    CHECK(masked_loss(x, other, BinaryMask(6, 4, 0)) == 0.0);
    CHECK(masked_loss(x, other, BinaryMask(6, 4, 0), true) == 0.0);
}

TEST_CASE("loss matches the worked two-pixel example") {
    ImageTensor x(2, 1, 1), xhat(2, 1, 1);
    x.at(0, 0, 0) = 0.0;
    x.at(1, 0, 0) = 1.0;
    xhat.at(0, 0, 0) = 1.0;
    xhat.at(1, 0, 0) = 1.0;
    const BinaryMask full(2, 1, 1);
    CHECK(masked_loss(x, xhat, full) == doctest::Approx(0.5).epsilon(1e-12));
    const ImageTensor g = masked_loss_gradient(x, xhat, full);
    CHECK(g.at(0, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(g.at(1, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));

    // With only the first pixel masked and area normalization, the divisor
    // becomes sum(m) = 1.
    BinaryMask first(2, 1, 0);
    first.at(0, 0) = 1;
    CHECK(masked_loss(x, xhat, first) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(masked_loss(x, xhat, first, true) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("loss rejects mismatched shapes") {
    const ImageTensor x(4, 4, 1), bad(5, 4, 1);
    const BinaryMask m(4, 4, 1), badm(4, 5, 0);
    CHECK_THROWS_AS(masked_loss(x, bad, m), DimensionMismatchError);
    CHECK_THROWS_AS(masked_loss(x, x, badm), DimensionMismatchError);
    CHECK_THROWS_AS(masked_loss_gradient(x, bad, m), DimensionMismatchError);
}

TEST_CASE("loss is nonnegative and grows with the mask") {
    Rng rng(52);
    for (int trial = 0; trial < 50; ++trial) {
        const ImageTensor x = random_tensor(rng, 5, 3, 2);
        const ImageTensor xhat = random_tensor(rng, 5, 3, 2);
        BinaryMask m = random_mask(rng, 5, 3);
        const double base = masked_loss(x, xhat, m);
        CHECK(base >= 0.0);
        // Setting one more pixel cannot reduce the (w*h)-normalized loss.
        BinaryMask grown = m;
        for (auto& v : grown.data)
            if (!v) {
                v = 1;
                break;
            }
        CHECK(masked_loss(x, xhat, grown) >= base);
    }
    const ImageTensor x = random_tensor(rng, 5, 3, 2);
    CHECK(masked_loss(x, x, BinaryMask(5, 3, 1)) == 0.0);
}

TEST_CASE("loss gradient matches central differences") {
    Rng rng(53);
    for (int trial = 0; trial < 100; ++trial) {
        const int w = 2 + static_cast<int>(rng.uniform_index(4));
        const int h = 2 + static_cast<int>(rng.uniform_index(4));
        const int c = 1 + static_cast<int>(rng.uniform_index(3));
        const bool area = trial % 2 == 1;
        const ImageTensor x = random_tensor(rng, w, h, c);
        ImageTensor xhat = random_tensor(rng, w, h, c);
        BinaryMask m = random_mask(rng, w, h);
        m.at(0, 0) = 1;  // keep the area-normalized divisor nonzero
        const ImageTensor g = masked_loss_gradient(x, xhat, m, area);
        for (int probe = 0; probe < 5; ++probe) {
            const std::size_t i = rng.uniform_index(xhat.data.size());
            const double fd = oracle::central_difference(
                [&] { return masked_loss(x, xhat, m, area); }, xhat.data[i], 1e-6);
            if (std::abs(fd) < 1e-12) {
                CHECK(std::abs(g.data[i]) < 1e-9);
            } else {
                CHECK(std::abs(g.data[i] - fd) / std::abs(fd) < 1e-4);
            }
        }
    }
}

TEST_CASE("model parameter gradients match central differences") {
    Rng rng(54);
    for (const Architecture arch : {Architecture::PatchLinear, Architecture::SmallConv}) {
        ModelConfig mc;
        mc.architecture = arch;
        mc.bottleneck = 6;
        mc.patch_size = 4;
        mc.seed = 7;
        const int w = 8, h = 8, c = 3;
        ReconstructionModel model = make_model(mc, w, h, c);
        const ImageTensor x = random_tensor(rng, w, h, c);
        BinaryMask m = random_mask(rng, w, h);
        m.at(0, 0) = 1;

        std::vector<double> grad(model.params.size(), 0.0);
        const double loss = model_loss_and_gradient(model, x, m, false, grad);
        CHECK(loss >= 0.0);

        for (int probe = 0; probe < 25; ++probe) {
            const std::size_t i = rng.uniform_index(model.params.size());
            const double fd = oracle::central_difference(
                [&] {
                    std::vector<double> scratch(model.params.size(), 0.0);
                    return model_loss_and_gradient(model, x, m, false, scratch);
                },
                model.params[i], 1e-5);
            const double denom = std::max({std::abs(fd), std::abs(grad[i]), 1e-3});
            CHECK(std::abs(grad[i] - fd) / denom < 1e-4);
        }
    }
}

TEST_CASE("a tiny gradient step never increases the loss") {
    Rng rng(55);
    for (const Architecture arch : {Architecture::PatchLinear, Architecture::SmallConv}) {
        for (int trial = 0; trial < 10; ++trial) {
            ModelConfig mc;
            mc.architecture = arch;
            mc.bottleneck = 4;
            mc.patch_size = 4;
            mc.seed = 100 + trial;
            ReconstructionModel model = make_model(mc, 8, 8, 1);
            const ImageTensor x = random_tensor(rng, 8, 8, 1);
            const BinaryMask m(8, 8, 1);
            std::vector<double> grad(model.params.size(), 0.0);
            const double before = model_loss_and_gradient(model, x, m, false, grad);
            for (std::size_t i = 0; i < grad.size(); ++i) model.params[i] -= 1e-6 * grad[i];
            std::vector<double> scratch(model.params.size(), 0.0);
            const double after = model_loss_and_gradient(model, x, m, false, scratch);
            CHECK(after <= before + 1e-12);
        }
    }
}

TEST_CASE("training fits a constant dataset") {
    ModelConfig mc;
    mc.bottleneck = 8;
    mc.patch_size = 4;
    mc.seed = 9;
    TrainConfig tc;
    tc.learning_rate = 1e-2;
    tc.batch_size = 2;
    tc.epochs = 60;
    tc.input_width = 8;
    tc.input_height = 8;
    tc.split = 0.8;
    tc.seed = 10;
    const auto dataset = constant_dataset(0.5, 5, 8, 8, 1);
    const TrainResult result = train(dataset, mc, tc);
    REQUIRE(!result.metrics.empty());
    CHECK(result.metrics.size() == static_cast<std::size_t>(tc.epochs));
    CHECK(result.metrics.back().train_loss < 1e-4);
    CHECK(result.model.best_epoch >= 0);

    const ImageTensor out = reconstruct(result.model, ImageTensor(8, 8, 1, 0.5));
    for (const double v : out.data) CHECK(std::abs(v - 0.5) < 1e-2);
}

TEST_CASE("training is deterministic in its seeds") {
    Rng rng(56);
    std::vector<TrainSample> dataset;
    for (int i = 0; i < 6; ++i)
        dataset.push_back({random_tensor(rng, 8, 8, 1), BinaryMask(8, 8, 1)});
    ModelConfig mc;
    mc.bottleneck = 4;
    mc.patch_size = 4;
    mc.seed = 21;
    TrainConfig tc;
    tc.learning_rate = 1e-3;
    tc.batch_size = 2;
    tc.epochs = 5;
    tc.input_width = 8;
    tc.input_height = 8;
    tc.seed = 22;
    const TrainResult a = train(dataset, mc, tc);
    const TrainResult b = train(dataset, mc, tc);
    CHECK(a.model.params == b.model.params);
    CHECK(a.model.best_val_loss == b.model.best_val_loss);
    CHECK(a.model.best_epoch == b.model.best_epoch);
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].train_loss == b.metrics[i].train_loss);
        CHECK(a.metrics[i].val_loss == b.metrics[i].val_loss);
    }
}

TEST_CASE("degenerate training inputs are rejected") {
    ModelConfig mc;
    mc.bottleneck = 4;
    mc.patch_size = 4;
    TrainConfig tc;
    tc.epochs = 1;
    tc.input_width = 8;
    tc.input_height = 8;
    CHECK_THROWS_AS(train({}, mc, tc), EmptyDatasetError);

    std::vector<TrainSample> masked;
    masked.push_back({ImageTensor(8, 8, 1, 0.3), BinaryMask(8, 8, 0)});
    masked.push_back({ImageTensor(8, 8, 1, 0.6), BinaryMask(8, 8, 0)});
    CHECK_THROWS_AS(train(masked, mc, tc), AllMasksEmptyError);
}

TEST_CASE("reconstruction has the input shape and stays in range") {
    Rng rng(57);
    for (const Architecture arch : {Architecture::PatchLinear, Architecture::SmallConv}) {
        ModelConfig mc;
        mc.architecture = arch;
        mc.bottleneck = 6;
        mc.patch_size = 4;
        mc.seed = 3;
        ReconstructionModel model = make_model(mc, 12, 8, 3);
        CHECK(model.params.size() == parameter_count(model));
        const ImageTensor x = random_tensor(rng, 12, 8, 3);
        const ImageTensor out = reconstruct(model, x);
        CHECK(out.width == 12);
        CHECK(out.height == 8);
        CHECK(out.channels == 3);
        for (const double v : out.data) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
        // All-zero parameters still produce a finite, in-range output.
        std::fill(model.params.begin(), model.params.end(), 0.0);
        for (const double v : reconstruct(model, x).data) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
            CHECK(v <= 1.0);
        }
    }
}

TEST_CASE("resize is exact on identity and constant inputs") {
    Rng rng(58);
    const ImageTensor x = random_tensor(rng, 7, 5, 3);
    const ImageTensor same = resize(x, 7, 5);
    REQUIRE(same.data.size() == x.data.size());
    for (std::size_t i = 0; i < x.data.size(); ++i)
        CHECK(same.data[i] == doctest::Approx(x.data[i]).epsilon(1e-12));

    const ImageTensor flat(9, 4, 2, 0.37);
    for (const double v : resize(flat, 30, 11).data)
        CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
    for (const double v : resize(resize(flat, 3, 2), 9, 4).data)
        CHECK(v == doctest::Approx(0.37).epsilon(1e-12));
}

TEST_CASE("upscaling a checkerboard interpolates its values") {
    ImageTensor x(2, 2, 1);
    x.at(0, 0, 0) = 0.0;
    x.at(1, 0, 0) = 1.0;
    x.at(0, 1, 0) = 1.0;
    x.at(1, 1, 0) = 0.0;
    const ImageTensor up = resize(x, 4, 4);
    // Half-pixel alignment keeps the corners at the source extremes and the
    // exact center at the mean.
    CHECK(up.at(0, 0, 0) == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(up.at(3, 0, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(up.at(0, 3, 0) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(up.at(3, 3, 0) == doctest::Approx(0.0).epsilon(1e-12));
    for (const double v : up.data) {
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
    }
}

TEST_CASE("checkpoints round-trip every field") {
    ModelConfig mc;
    mc.architecture = Architecture::SmallConv;
    mc.bottleneck = 5;
    mc.seed = 77;
    ReconstructionModel model = make_model(mc, 8, 8, 3);
    model.best_val_loss = 0.123456789012345;
    model.best_epoch = 42;
    const auto path =
        (std::filesystem::temp_directory_path() / "trailmark_ckpt_roundtrip.tmck").string();
    save_checkpoint(path, model);
    const ReconstructionModel back = load_checkpoint(path);
    CHECK(back.architecture == model.architecture);
    CHECK(back.bottleneck == model.bottleneck);
    CHECK(back.patch_size == model.patch_size);
    CHECK(back.input_width == model.input_width);
    CHECK(back.input_height == model.input_height);
    CHECK(back.channels == model.channels);
    CHECK(back.best_epoch == model.best_epoch);
    CHECK(back.best_val_loss == model.best_val_loss);
    CHECK(back.params == model.params);
    std::filesystem::remove(path);
}

TEST_CASE("loading a corrupt checkpoint fails cleanly") {
    const auto path = (std::filesystem::temp_directory_path() / "trailmark_ckpt_bad.tmck").string();
    {
        std::ofstream out(path, std::ios::binary);
        out << "NOPE garbage";
    }
    CHECK_THROWS_AS(load_checkpoint(path), ParseError);
    CHECK_THROWS_AS(load_checkpoint(path + ".missing"), MissingFileError);
    std::filesystem::remove(path);
}

TEST_CASE("metric logs are line-delimited epoch rows") {
    const std::vector<EpochMetrics> metrics = {{0, 0.5, 0.6}, {1, 0.25, 0.3}};
    const auto path =
        (std::filesystem::temp_directory_path() / "trailmark_metrics.txt").string();
    save_metrics(path, metrics);
    std::ifstream in(path);
    int epoch = -1;
    double tr = 0, va = 0;
    REQUIRE((in >> epoch >> tr >> va));
    CHECK(epoch == 0);
    CHECK(tr == doctest::Approx(0.5));
    CHECK(va == doctest::Approx(0.6));
    REQUIRE((in >> epoch >> tr >> va));
    CHECK(epoch == 1);
    std::filesystem::remove(path);
}

}  // TEST_SUITE
