#include <benchmark/benchmark.h>

#include "regul/registry.hpp"
#include "regul/simulate.hpp"

using namespace regul;

namespace {

ClosedLoop make_loop() {
    ModelBundle bundle = make_aircraft_bundle(aircraft::Params::make());
    ClosedLoop loop;
    loop.model = bundle.model;
    loop.feedback = bundle.feedback;
    loop.ia = bundle.ia;
    loop.chart = bundle.chart;
    loop.barrier = bundle.barrier;
    loop.ell = 10.0;
    loop.levels.mu = 5.3;
    loop.levels.xbar = 100.0;
    return loop;
}

Vec nominal_state() {
    const auto params = aircraft::Params::make();
    Vec x(3);
    x << 210.0, 0.1, params.theta_star() + 0.05;
    ClosedLoopState s;
    s.x = aircraft::to_deviation(params, x);
    s.z = Vec::Zero(1);
    s.xhat = aircraft::to_deviation(params, Vec(1.05 * x));
    return s.pack();
}

void ClosedLoopRhs(benchmark::State& state) {
    const ClosedLoop loop = make_loop();
    const Vec s = nominal_state();
    for (auto _ : state) {
        Vec out = loop.rhs(s);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(ClosedLoopRhs);

void ObserverStep(benchmark::State& state) {
    const auto params = aircraft::Params::make();
    const auto model = aircraft::model(params);
    const auto chart = aircraft::chart(params);
    const auto barrier = aircraft::barrier(params);
    Vec xhat = Vec::Zero(3), y(2), u(2);
    y << 0.05, 0.02;
    u << 0.5, 0.1;
    for (auto _ : state) {
        Vec out = observer_rhs(chart, model, xhat, y, u, 10.0, &barrier);
        benchmark::DoNotOptimize(out);
    }
}
BENCHMARK(ObserverStep);

void IntegrateOneSecond(benchmark::State& state) {
    const ClosedLoop loop = make_loop();
    const Vec s0 = nominal_state();
    IntegratorConfig cfg;
    cfg.dt = 1e-3;
    cfg.t_end = 1.0;
    cfg.record_every = 0.1;
    const Rhs rhs = loop.as_rhs();
    for (auto _ : state) {
        Trace trace = integrate(rhs, s0, cfg);
        benchmark::DoNotOptimize(trace);
    }
}
BENCHMARK(IntegrateOneSecond);

void FeedbackEval(benchmark::State& state) {
    const auto params = aircraft::Params::make();
    for (auto _ : state) {
        Vec u = aircraft::feedback(params, 3.0, 207.0, 0.06, 0.09);
        benchmark::DoNotOptimize(u);
    }
}
BENCHMARK(FeedbackEval);

}  // namespace

BENCHMARK_MAIN();
