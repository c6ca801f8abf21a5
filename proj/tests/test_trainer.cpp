#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <sstream>

#include "difface/checkpoint.hpp"
#include "difface/errors.hpp"
#include "difface/speech_encoder.hpp"
#include "difface/trainer.hpp"
#include "test_util.hpp"

namespace difface {
namespace {

using testing::TempDir;

std::vector<Example> synthetic_examples(int n, int frames, int dims, std::uint64_t seed) {
    const auto ds = generate_synthetic_dataset(n, frames, dims, seed);
    std::vector<Example> out;
    for (const auto& item : ds) {
        Example ex;
        ex.id = item.motion.subject + "/" + item.motion.sentence;
        ex.audio = align_to_frames(stub_encode(item.audio), item.motion.num_frames());
        ex.motion = item.motion.frames;
        ex.style = item.motion.subject == "S0" ? 0 : 1;
        out.push_back(std::move(ex));
    }
    return out;
}

DecoderConfig small_config(int dims) {
    DecoderConfig c;
    c.kind = MotionKind::kRig;
    c.output_dim = dims;
    c.audio_dim = StubEncoder::kFeatureDim;
    c.layers = 1;
    c.hidden_size = 16;
    c.dropout = 0.1;
    c.t_emb_dim = 8;
    c.num_styles = 2;
    return c;
}

TrainConfig small_train(int epochs, double lr = 1e-3) {
    TrainConfig t;
    t.learning_rate = lr;
    t.epochs = epochs;
    t.seed = 77;
    return t;
}

std::vector<Matrix> snapshot(const FaceDecoder& m) {
    std::vector<Matrix> out;
    for (const auto* p : m.parameters().all()) out.push_back(p->value);
    return out;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

int count_lines(const std::filesystem::path& p) {
    std::ifstream in(p);
    int n = 0;
    std::string line;
    while (std::getline(in, line)) n += line.empty() ? 0 : 1;
    return n;
}

TEST(Trainer, ZeroLearningRateLeavesParametersUnchanged) {
    const auto data = synthetic_examples(2, 6, 5, 1);
    FaceDecoder model(small_config(5), 3);
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1, 0.0));
    const auto before = snapshot(model);
    const double loss = trainer.train_step(data[0]);
    EXPECT_TRUE(std::isfinite(loss));
    EXPECT_GT(loss, 0.0);
    EXPECT_EQ(snapshot(model), before);
    EXPECT_EQ(trainer.state().step, 1);
}

TEST(Adam, ZeroGradientStepLeavesParametersUnchanged) {
    FaceDecoder model(small_config(5), 3);
    const auto before = snapshot(model);
    model.parameters().zero_grad();
    Adam adam(1e-2);
    adam.step(model.parameters());
    adam.step(model.parameters());
    EXPECT_EQ(snapshot(model), before);
    EXPECT_EQ(adam.steps(), 2);
}

TEST(Adam, FirstStepMovesByLearningRate) {
    ag::ParameterStore store;
    auto& p = store.add("p", Matrix::Constant(1, 2, 1.0));
    p.grad << 0.3, -5.0;
    Adam adam(0.1);
    adam.step(store);
    // Bias-corrected first step: lr * g / (|g| + eps).
    EXPECT_NEAR(p.value(0, 0), 1.0 - 0.1 * 0.3 / (0.3 + 1e-8), 1e-12);
    EXPECT_NEAR(p.value(0, 1), 1.0 + 0.1 * 5.0 / (5.0 + 1e-8), 1e-12);
}

TEST(Trainer, SameSeedGivesIdenticalLossTrajectories) {
    const auto data = synthetic_examples(3, 8, 5, 2);
    auto run = [&] {
        FaceDecoder model(small_config(5), 9);
        const auto sched = build_linear_schedule(20);
        Trainer trainer(model, sched, small_train(1));
        std::vector<double> losses;
        for (int i = 0; i < 12; ++i) losses.push_back(trainer.train_step(data[i % data.size()]));
        return losses;
    };
    const auto a = run();
    const auto b = run();
    EXPECT_EQ(a, b);
}

TEST(Trainer, OneEpochLogsExactlyOneRow) {
    TempDir dir("fit_one");
    const auto data = synthetic_examples(2, 6, 5, 3);
    FaceDecoder model(small_config(5), 1);
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    const auto r = trainer.fit(data, {}, dir.path());
    EXPECT_EQ(r.train_losses.size(), 1u);
    EXPECT_EQ(count_lines(r.log), 2);  // header + one epoch
    EXPECT_TRUE(std::filesystem::exists(r.best_checkpoint));
    EXPECT_TRUE(std::filesystem::exists(r.last_checkpoint));
    EXPECT_EQ(trainer.state().step, 2);
}

TEST(Trainer, ResumeContinuesWithoutRepeatingEpochs) {
    TempDir dir("fit_resume");
    const auto train = synthetic_examples(3, 6, 5, 4);
    const std::vector<Example> val(train.begin(), train.begin() + 1);
    const auto sched = build_linear_schedule(20);

    FaceDecoder full_model(small_config(5), 5);
    Trainer full(full_model, sched, small_train(4));
    const auto reference = full.fit(train, val, dir / "full");

    FaceDecoder first_model(small_config(5), 5);
    Trainer first(first_model, sched, small_train(2));
    first.fit(train, val, dir / "split");

    FaceDecoder second_model(small_config(5), 5);
    Trainer second(second_model, sched, small_train(4));
    const auto resumed = second.fit(train, val, dir / "split", {}, dir / "split" / "last.ckpt");

    ASSERT_EQ(resumed.train_losses.size(), 2u);
    EXPECT_EQ(second.state().step, 12);
    EXPECT_EQ(second.state().epoch, 4);
    // Restored optimizer and rng state reproduce the uninterrupted run exactly.
    EXPECT_EQ(resumed.train_losses[0], reference.train_losses[2]);
    EXPECT_EQ(resumed.train_losses[1], reference.train_losses[3]);

    std::ifstream log(dir / "split" / "train_log.csv");
    std::string line;
    std::getline(log, line);
    std::vector<int> epochs;
    while (std::getline(log, line)) epochs.push_back(std::stoi(line.substr(0, line.find(','))));
    EXPECT_EQ(epochs, (std::vector<int>{1, 2, 3, 4}));
}

TEST(Trainer, EmptyTrainSplitIsConfigError) {
    TempDir dir("fit_empty");
    FaceDecoder model(small_config(5), 1);
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    EXPECT_THROW(trainer.fit({}, {}, dir.path()), ConfigError);
}

TEST(Trainer, EvaluateLossIsZeroForExactModel) {
    auto cfg = small_config(4);
    cfg.num_styles = 0;
    FaceDecoder model(cfg, 1);
    RowVector target(4);
    target << 0.1, -0.2, 0.3, 0.0;
    model.parameters().find("output.weight")->value.setZero();
    model.parameters().find("output.bias")->value = target;
    std::vector<Example> subset;
    for (int i = 0; i < 3; ++i) {
        Example ex;
        ex.id = "seq" + std::to_string(i);
        ex.audio = Matrix::Random(5 + i, StubEncoder::kFeatureDim);
        ex.motion = target.replicate(5 + i, 1);
        subset.push_back(ex);
    }
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    EXPECT_EQ(trainer.evaluate_loss(subset), 0.0);
}

TEST(Trainer, EvaluateLossDeterministicAndEqualsMeanOfSingletons) {
    const auto data = synthetic_examples(4, 7, 5, 6);
    FaceDecoder model(small_config(5), 2);
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    const double a = trainer.evaluate_loss(data);
    EXPECT_EQ(a, trainer.evaluate_loss(data));
    double manual = 0.0;
    for (const auto& ex : data) manual += trainer.evaluate_loss({ex});
    EXPECT_NEAR(a, manual / static_cast<double>(data.size()), 1e-15);
    // Dropout is active in training but not in evaluation.
    trainer.train_step(data[0]);
    const double b = trainer.evaluate_loss(data);
    EXPECT_EQ(b, trainer.evaluate_loss(data));
}

TEST(Checkpoint, SaveLoadSaveIsByteIdentical) {
    TempDir dir("ckpt");
    const auto data = synthetic_examples(2, 6, 5, 7);
    FaceDecoder model(small_config(5), 4);
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    trainer.train_step(data[0]);
    trainer.train_step(data[1]);
    const nlohmann::json run = {{"note", "unit"}};
    save_checkpoint(dir / "a.ckpt", trainer.make_checkpoint(run));
    save_checkpoint(dir / "b.ckpt", load_checkpoint(dir / "a.ckpt"));
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "b.ckpt"));

    // Restoring into a fresh trainer and saving again reproduces the file too.
    FaceDecoder other(small_config(5), 99);
    Trainer restored(other, sched, small_train(1));
    restored.restore(load_checkpoint(dir / "a.ckpt"));
    save_checkpoint(dir / "c.ckpt", restored.make_checkpoint(run));
    EXPECT_EQ(slurp(dir / "a.ckpt"), slurp(dir / "c.ckpt"));
    EXPECT_EQ(snapshot(other), snapshot(model));
}

TEST(Checkpoint, ConfigHashMismatchIsRejected) {
    TempDir dir("ckpt_hash");
    FaceDecoder model(small_config(5), 4);
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    save_checkpoint(dir / "a.ckpt", trainer.make_checkpoint({}));
    const auto ckpt = load_checkpoint(dir / "a.ckpt");

    auto wider = small_config(5);
    wider.hidden_size = 32;
    FaceDecoder other(wider, 4);
    Trainer other_trainer(other, sched, small_train(1));
    EXPECT_THROW(other_trainer.restore(ckpt), ConfigError);

    FaceDecoder same(small_config(5), 4);
    const auto other_sched = build_linear_schedule(30);
    Trainer wrong_schedule(same, other_sched, small_train(1));
    EXPECT_THROW(wrong_schedule.restore(ckpt), ConfigError);
}

TEST(Checkpoint, CorruptFileIsDataError) {
    TempDir dir("ckpt_bad");
    {
        std::ofstream out(dir / "bad.ckpt", std::ios::binary);
        out << "DFCK\x01\x00";
    }
    EXPECT_THROW(load_checkpoint(dir / "bad.ckpt"), DataError);
    EXPECT_THROW(load_checkpoint(dir / "missing.ckpt"), DataError);
}

TEST(Trainer, LossStaysFiniteForThousandSteps) {
    const auto data = synthetic_examples(8, 10, 6, 8);
    auto cfg = small_config(6);
    FaceDecoder model(cfg, 6);
    const auto sched = build_linear_schedule(100);
    Trainer trainer(model, sched, small_train(1, 2e-3));
    for (int i = 0; i < 1000; ++i) {
        const double loss = trainer.train_step(data[static_cast<std::size_t>(i) % data.size()]);
        ASSERT_TRUE(std::isfinite(loss)) << "step " << i;
    }
}

TEST(Trainer, NanParameterRaisesNumericErrorAndSavesSnapshot) {
    TempDir dir("fit_nan");
    const auto data = synthetic_examples(2, 6, 5, 9);
    FaceDecoder model(small_config(5), 1);
    model.parameters().find("output.weight")->value(0, 0) = std::numeric_limits<double>::quiet_NaN();
    const auto sched = build_linear_schedule(20);
    Trainer trainer(model, sched, small_train(1));
    EXPECT_THROW(trainer.train_step(data[0]), NumericError);
    EXPECT_THROW(trainer.fit(data, {}, dir.path()), NumericError);
    EXPECT_TRUE(std::filesystem::exists(dir / "diverged.ckpt"));
}

TEST(Trainer, BatchedStepsUseLengthBuckets) {
    TempDir dir("fit_batch");
    auto data = synthetic_examples(4, 6, 5, 10);
    const auto longer = synthetic_examples(2, 9, 5, 10);
    data.insert(data.end(), longer.begin(), longer.end());
    data[4].id = "long0";
    data[5].id = "long1";
    FaceDecoder model(small_config(5), 1);
    const auto sched = build_linear_schedule(20);
    auto cfg = small_train(1);
    cfg.batch_size = 2;
    Trainer trainer(model, sched, cfg);
    trainer.fit(data, {}, dir.path());
    EXPECT_EQ(trainer.state().step, 3);
}

TEST(TrainConfig, Validation) {
    auto c = small_train(1);
    c.epochs = 0;
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_train(1, -1.0);
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_train(1);
    c.optimizer = "sgd";
    EXPECT_THROW(c.validate(), ConfigError);
    c = small_train(1);
    c.device = "cuda:0";
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(SampleSequence, DiffusionDisabledEvaluatesOnce) {
    FaceDecoder model(small_config(5), 1);
    const auto sched = build_linear_schedule(20);
    Rng rng(1);
    SampleStats stats;
    const Matrix audio = Matrix::Random(4, StubEncoder::kFeatureDim);
    const Matrix out = sample_sequence(model, audio, 0, sched, rng, 20, false, &stats);
    EXPECT_EQ(stats.evaluations, 1);
    EXPECT_EQ(out, model.predict(audio, Matrix::Zero(4, 5), 0, 0));
    SampleStats full;
    sample_sequence(model, audio, 0, sched, rng, 20, true, &full);
    EXPECT_EQ(full.evaluations, 20);
}

}  // namespace
}  // namespace difface
