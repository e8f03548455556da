#include <benchmark/benchmark.h>

#include "hetreg/datasets.hpp"
#include "hetreg/train.hpp"

// One optimizer step (graph build, backward, AdamW update) per iteration,
// mirroring the CLI bench subcommand so the two agree on what a "step" is.

namespace {

struct StepFixture {
    hetreg::LossKind loss;
    hetreg::RegressionDataset ds;
    hetreg::TrainLabels labels;
    hetreg::Predictor predictor;
    hetreg::AdamW opt{hetreg::AdamWConfig{.lr = 1e-3}};
    std::vector<std::size_t> slots;
    std::vector<std::size_t> rows;

    StepFixture(hetreg::LossKind loss_kind, std::size_t dim, std::size_t batch)
        : loss(loss_kind) {
        ds = hetreg::gen_multivariate(dim, 512, 1);
        labels = hetreg::labels_from_ground_truth(ds);
        hetreg::TrainSpec spec;
        spec.loss = loss;
        spec.mean_arch.hidden_layers = spec.cov_arch.hidden_layers = 2;
        spec.mean_arch.hidden_width = spec.cov_arch.hidden_width = 64;
        spec.mean_arch.activation = spec.cov_arch.activation = hetreg::Activation::elu;
        predictor = hetreg::make_predictor(ds, spec);
        for (auto *params : {&predictor.mean, &predictor.cov})
            for (std::size_t l = 0; l < params->weights.size(); ++l) {
                slots.push_back(opt.register_tensor(params->weights[l].size()));
                slots.push_back(opt.register_tensor(params->biases[l].size()));
            }
        rows.resize(batch);
        for (std::size_t i = 0; i < batch; ++i) rows[i] = i % ds.size();
    }

    void step() {
        hetreg::LossBatch batch = hetreg::make_batch(ds, &labels, rows);
        hetreg::ad::Tape tape;
        hetreg::NetRefs mean_net = hetreg::bind_params(tape, predictor.mean_cfg, predictor.mean);
        hetreg::NetRefs cov_net = hetreg::bind_params(tape, predictor.cov_cfg, predictor.cov);
        hetreg::ad::Ref l =
            hetreg::build_loss(tape, loss, batch, mean_net, cov_net, predictor.head);
        tape.backward(l);
        opt.begin_step();
        std::size_t s = 0;
        for (auto *params : {&predictor.mean, &predictor.cov}) {
            const hetreg::NetRefs &net = params == &predictor.mean ? mean_net : cov_net;
            for (std::size_t layer = 0; layer < params->weights.size(); ++layer) {
                opt.update(slots[s++], params->weights[layer].data(),
                           tape.grad(net.weights[layer]));
                opt.update(slots[s++], params->biases[layer], tape.grad(net.biases[layer]));
            }
        }
    }
};

void bench_loss_step(benchmark::State &state, hetreg::LossKind loss) {
    const auto dim = static_cast<std::size_t>(state.range(0));
    StepFixture fixture(loss, dim, 64);
    for (auto _ : state) {
        fixture.step();
        benchmark::ClobberMemory();
    }
}

} // namespace

BENCHMARK_CAPTURE(bench_loss_step, nll_full, hetreg::LossKind::nll_full())
    ->Arg(4)
    ->Arg(8)
    ->Arg(16)
    ->Arg(32)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_loss_step, w2_bound, hetreg::LossKind::w2_bound())
    ->Arg(4)
    ->Arg(8)
    ->Arg(16)
    ->Arg(32)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_loss_step, kl_calibrated, hetreg::LossKind::kl_calibrated())
    ->Arg(4)
    ->Arg(8)
    ->Arg(16)
    ->Arg(32)
    ->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(bench_loss_step, beta_nll, hetreg::LossKind::beta_nll(0.5))
    ->Arg(4)
    ->Arg(8)
    ->Arg(16)
    ->Arg(32)
    ->Unit(benchmark::kMillisecond);
