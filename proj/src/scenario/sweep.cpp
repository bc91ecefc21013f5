#include "ibrprot/scenario/scenario.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <mutex>
#include <thread>

namespace ibrprot::scenario {

SweepResult run_sweep(const SweepSpec& spec, int jobs,
                      const std::function<void(std::size_t, const ScenarioResult&)>& on_done) {
    const auto cases = spec.expand();
    SweepResult out;
    out.results.resize(cases.size());
    if (cases.empty()) return out;

    if (jobs <= 0) jobs = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
    jobs = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(jobs), cases.size()));

    // Each case owns its slot, so the order workers finish in never shows up
    // in the results.
    std::atomic<std::size_t> next{0};
    std::mutex report;
    auto worker = [&] {
        for (std::size_t k = next++; k < cases.size(); k = next++) {
            ScenarioResult r;
            try {
                r = run_scenario(cases[k]);
            } catch (const std::exception& e) {
                r.scenario = cases[k];
                r.status = RunStatus::invalid;
                r.stable = false;
                r.message = e.what();
            }
            out.results[k] = std::move(r);
            if (on_done) {
                std::lock_guard lock(report);
                on_done(k, out.results[k]);
            }
        }
    };

    if (jobs == 1) {
        worker();
        return out;
    }
    {
        std::vector<std::jthread> pool;
        pool.reserve(static_cast<std::size_t>(jobs));
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
    }
    return out;
}

}  // namespace ibrprot::scenario
