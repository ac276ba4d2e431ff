// SPDX-License-Identifier: Apache-2.0
//
// End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
// exits with the number of failed criteria. Quantitative criteria (1-6) rerun
// the experiment presets with fixed seeds; property criteria (7-14) are exact
// and seed-independent.
#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fedsim/config.hpp"
#include "fedsim/simulator.hpp"

#ifndef FEDSIM_DATA_DIR
#define FEDSIM_DATA_DIR "data"
#endif

using namespace fedsim;

namespace {

int g_failures = 0;

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("%s criterion %2d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++g_failures;
}

std::string fmt(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

const TabularDataset& dataset(const std::string& name) {
    static TabularDataset pima = load_pima(std::string(FEDSIM_DATA_DIR) + "/pima.csv");
    static TabularDataset heart = load_heart(std::string(FEDSIM_DATA_DIR) + "/heart.csv");
    return name == "pima" ? pima : heart;
}

// Memoised preset runs so criteria sharing a configuration reuse results.
const RunResult& run(const std::string& preset, const std::string& variant,
                     const std::string& privacy, Strategy strategy, std::uint64_t seed) {
    using Key = std::tuple<std::string, std::string, std::string, int, std::uint64_t>;
    static std::map<Key, RunResult> memo;
    Key key{preset, variant, privacy, static_cast<int>(strategy), seed};
    auto it = memo.find(key);
    if (it == memo.end()) {
        SimulationConfig cfg = make_preset(preset, variant, privacy);
        cfg.strategy = strategy;
        cfg.master_seed = seed;
        it = memo.emplace(key, run_simulation(cfg, dataset(cfg.dataset))).first;
    }
    return it->second;
}

double final_error(const RunResult& res) { return res.rounds.back().test_error; }

double median5(const std::string& preset, const std::string& variant,
               const std::string& privacy, Strategy strategy) {
    std::vector<double> errs;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        errs.push_back(final_error(run(preset, variant, privacy, strategy, seed)));
    }
    std::sort(errs.begin(), errs.end());
    return errs[2];
}

// Error of always predicting the training majority class, on the same
// train/test split the run uses.
double majority_baseline(const std::string& preset, std::uint64_t seed) {
    SimulationConfig cfg = make_preset(preset, "clean", "none");
    auto [train, test] = split(dataset(cfg.dataset), cfg.train_count,
                               derive_seed(seed, 0, 0, "split"), cfg.test_count);
    std::size_t pos = 0;
    for (int y : train.labels) pos += static_cast<std::size_t>(y);
    const int majority = pos * 2 >= train.rows() ? 1 : 0;
    std::size_t wrong = 0;
    for (int y : test.labels) wrong += static_cast<std::size_t>(y != majority);
    return static_cast<double>(wrong) / static_cast<double>(test.rows());
}

Rng make_rng(std::uint64_t seed) { return Rng(derive_seed(seed, 0, 0, "acceptance")); }

std::vector<ModelUpdate> random_updates(Rng& rng, std::size_t n, std::size_t p, double scale) {
    std::vector<ModelUpdate> updates;
    for (std::size_t i = 0; i < n; ++i) {
        ModelUpdate u;
        u.client_id = static_cast<int>(i) + 1;
        u.sample_count = 1 + rng.below(50);
        u.params.resize(p);
        for (auto& v : u.params) v = scale * (rng.uniform() - 0.5);
        updates.push_back(std::move(u));
    }
    return updates;
}

// --- criterion 1: baseline accuracy, no privacy, no bad clients ------------

void criterion1() {
    bool ok = true;
    std::ostringstream detail;
    detail << "clean baselines:";
    const Strategy core[] = {Strategy::fedavg, Strategy::comed, Strategy::afa};
    for (const std::string preset : {"exp1", "exp2"}) {
        const double bar = majority_baseline(preset, 1) - 0.05;
        detail << ' ' << preset << " bar " << fmt(bar) << " |";
        for (Strategy s : core) {
            const double err = final_error(run(preset, "clean", "none", s, 1));
            detail << ' ' << to_string(s) << ' ' << fmt(err);
            ok = ok && err <= bar;
        }
        detail << ';';
    }
    // heart MKRUM should not beat the best of the other strategies
    const double mk = median5("exp2", "clean", "none", Strategy::mkrum);
    double best_other = 1.0;
    for (Strategy s : core) {
        best_other = std::min(best_other, median5("exp2", "clean", "none", s));
    }
    detail << " heart mkrum median " << fmt(mk) << " vs best other " << fmt(best_other);
    ok = ok && mk >= best_other;
    report(1, ok, detail.str());
}

// --- criterion 2: heart, clean clients, DP release -------------------------

void criterion2() {
    const double fa = median5("exp2", "clean", "dp", Strategy::fedavg);
    const double cm = median5("exp2", "clean", "dp", Strategy::comed);
    const double af = median5("exp2", "clean", "dp", Strategy::afa);
    const double mk = median5("exp2", "clean", "dp", Strategy::mkrum);
    const bool in_band =
        fa >= 0.03 && fa <= 0.15 && cm >= 0.03 && cm <= 0.15 && af >= 0.03 && af <= 0.15;
    const bool mkrum_worst = mk > fa && mk > cm && mk > af;
    std::ostringstream detail;
    detail << "clean+dp medians: fa " << fmt(fa) << " comed " << fmt(cm) << " afa " << fmt(af)
           << " (band [0.03,0.15]), mkrum " << fmt(mk) << " must exceed all three";
    report(2, in_band && mkrum_worst, detail.str());
}

// --- criterion 3: heart, bad clients, DP release ---------------------------

void criterion3() {
    const double fa = median5("exp2", "bad_clients", "dp", Strategy::fedavg);
    const double cm = median5("exp2", "bad_clients", "dp", Strategy::comed);
    const double af = median5("exp2", "bad_clients", "dp", Strategy::afa);
    const bool robust_ok = af <= 0.15 && cm <= 0.15;
    const bool fa_gap = fa - af >= 0.10;
    std::ostringstream detail;
    detail << "bad+dp medians: afa " << fmt(af) << " comed " << fmt(cm)
           << " (need <= 0.15), fa " << fmt(fa) << " must exceed afa by >= 0.10";
    report(3, robust_ok && fa_gap, detail.str());
}

// --- criterion 4: AFA blocks both bad clients ------------------------------

void criterion4() {
    const RunResult& res = run("exp2", "bad_clients", "dp", Strategy::afa, 1);
    bool got1 = false, got2 = false;
    std::ostringstream events;
    for (const auto& [round, id] : res.block_events) {
        if (round <= 100 && id == 1) got1 = true;
        if (round <= 100 && id == 2) got2 = true;
        events << " (round " << round << ", client " << id << ')';
    }
    std::ostringstream detail;
    detail << "afa block events:" << (res.block_events.empty() ? " none" : events.str())
           << "; need clients 1 and 2 within 100 rounds";
    report(4, got1 && got2, detail.str());
}

// --- criterion 5: diabetes, bad clients, DP release ------------------------

void criterion5() {
    const double fa = median5("exp1", "bad_clients", "dp", Strategy::fedavg);
    const double cm = median5("exp1", "bad_clients", "dp", Strategy::comed);
    const double mk = median5("exp1", "bad_clients", "dp", Strategy::mkrum);
    const double af = median5("exp1", "bad_clients", "dp", Strategy::afa);
    const bool fa_diverges = fa > cm && fa > mk && fa > af;
    const bool mkrum_lowest = mk <= cm && mk <= af;

    // per-seed ordering between the two closest robust strategies
    int mk_lower = 0, af_lower = 0, tied = 0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        const double m = final_error(run("exp1", "bad_clients", "dp", Strategy::mkrum, seed));
        const double a = final_error(run("exp1", "bad_clients", "dp", Strategy::afa, seed));
        if (m < a) ++mk_lower;
        else if (a < m) ++af_lower;
        else ++tied;
    }
    // unstable: no strict winner across all five seeds (ties included)
    const bool order_unstable = mk_lower < 5 && af_lower < 5;

    std::ostringstream detail;
    detail << "bad+dp medians: fa " << fmt(fa) << " comed " << fmt(cm) << " mkrum " << fmt(mk)
           << " afa " << fmt(af) << "; fa-diverges " << (fa_diverges ? "holds" : "violated");
    bool ok = fa_diverges;
    if (mkrum_lowest) {
        detail << ", mkrum lowest";
    } else if (order_unstable) {
        detail << ", mkrum/afa ordering seed-unstable (mkrum lower " << mk_lower
               << ", afa lower " << af_lower << ", tied " << tied
               << "), fa-diverges clause governs";
    } else {
        detail << ", mkrum not lowest and ordering stable";
        ok = false;
    }
    report(5, ok, detail.str());
}

// --- criterion 6: diabetes, k-anonymity, clean -----------------------------

void criterion6() {
    double lo = 1.0, hi = 0.0;
    std::ostringstream detail;
    detail << "clean+kanon errors:";
    for (Strategy s : {Strategy::fedavg, Strategy::comed, Strategy::mkrum, Strategy::afa}) {
        const double err = final_error(run("exp1", "clean", "kanon", s, 1));
        detail << ' ' << to_string(s) << ' ' << fmt(err);
        lo = std::min(lo, err);
        hi = std::max(hi, err);
    }
    detail << "; spread " << fmt(hi - lo) << " (need <= 0.05)";
    report(6, hi - lo <= 0.05, detail.str());
}

// --- criterion 7: analytic gradient vs central differences -----------------

void criterion7() {
    Rng rng = make_rng(7);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t in = 2 + rng.below(4);
        const std::size_t hidden = 2 + rng.below(5);
        MlpModel model(in, {hidden, 2});
        model.init(rng);
        const std::size_t rows = 2 + rng.below(4);
        std::vector<double> batch(rows * in);
        for (auto& v : batch) v = 2.0 * (rng.uniform() - 0.5);
        std::vector<int> labels(rows);
        for (auto& y : labels) y = static_cast<int>(rng.below(2));

        const auto analytic = model.backward(batch, rows, labels);
        ParameterVector params = model.flatten();
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            ParameterVector probe = params;
            probe[i] = params[i] + h;
            model.unflatten(probe);
            const double up = model.backward(batch, rows, labels).loss;
            probe[i] = params[i] - h;
            model.unflatten(probe);
            const double down = model.backward(batch, rows, labels).loss;
            const double fd = (up - down) / (2.0 * h);
            const double rel = std::fabs(analytic.grad[i] - fd) /
                               std::max(1.0, std::fabs(analytic.grad[i]));
            worst = std::max(worst, rel);
        }
        model.unflatten(params);
    }
    std::ostringstream detail;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", worst);
    detail << "20 random models, worst relative gradient error " << buf << " (need <= 1e-4)";
    report(7, worst <= 1e-4, detail.str());
}

// --- criterion 8: COMED equals the sort-median oracle ----------------------

void criterion8() {
    Rng rng = make_rng(8);
    bool ok = true;
    for (int trial = 0; trial < 200 && ok; ++trial) {
        const std::size_t n = 1 + rng.below(9);
        const std::size_t p = 1 + rng.below(30);
        auto updates = random_updates(rng, n, p, 10.0);
        const ParameterVector got = comed(updates);
        for (std::size_t i = 0; i < p; ++i) {
            std::vector<double> col;
            for (const auto& u : updates) col.push_back(u.params[i]);
            std::sort(col.begin(), col.end());
            const double want = n % 2 == 1 ? col[n / 2] : 0.5 * (col[n / 2 - 1] + col[n / 2]);
            if (got[i] != want) ok = false;
        }
    }
    report(8, ok, "comed == per-coordinate sort median on 200 random instances (exact)");
}

// --- criterion 9: krum scores vs brute force; mkrum(m=n) == fedavg ---------

void criterion9() {
    Rng rng = make_rng(9);
    bool scores_ok = true;
    for (int trial = 0; trial < 100 && scores_ok; ++trial) {
        const std::size_t n = 2 + rng.below(9);
        const std::size_t p = 1 + rng.below(20);
        auto updates = random_updates(rng, n, p, 4.0);
        auto scores = krum_scores(updates, KrumNeighborMode::all_pairs);
        for (std::size_t i = 0; i < n; ++i) {
            // brute-force distances; s_i sums them smallest-first as the
            // sum-of-k-nearest definition prescribes
            std::vector<double> d2s;
            for (std::size_t j = 0; j < n; ++j) {
                if (j == i) continue;
                double d2 = 0.0;
                const auto& a = updates[std::min(i, j)].params;
                const auto& b = updates[std::max(i, j)].params;
                for (std::size_t k = 0; k < p; ++k) d2 += (a[k] - b[k]) * (a[k] - b[k]);
                d2s.push_back(d2);
            }
            std::sort(d2s.begin(), d2s.end());
            double want = 0.0;
            for (double d2 : d2s) want += d2;
            if (scores[i].first != updates[i].client_id || scores[i].second != want) {
                scores_ok = false;
            }
        }
    }
    bool avg_ok = true;
    for (int trial = 0; trial < 50 && avg_ok; ++trial) {
        const std::size_t n = 2 + rng.below(7);
        auto updates = random_updates(rng, n, 1 + rng.below(20), 4.0);
        MkrumConfig mc;
        mc.m = n;
        const auto [agg, ids] = mkrum(updates, mc);
        const ParameterVector avg = fedavg(updates);
        for (std::size_t i = 0; i < avg.size(); ++i) {
            if (std::fabs(agg[i] - avg[i]) > 1e-12) avg_ok = false;
        }
        if (ids.size() != n) avg_ok = false;
    }
    std::ostringstream detail;
    detail << "krum scores " << (scores_ok ? "match" : "mismatch")
           << " brute force exactly; mkrum(m=n) " << (avg_ok ? "equals" : "differs from")
           << " fedavg to 1e-12";
    report(9, scores_ok && avg_ok, detail.str());
}

// --- criterion 10: COMED breakdown property --------------------------------

void criterion10() {
    Rng rng = make_rng(10);
    bool ok = true;
    for (std::size_t f : {std::size_t{1}, std::size_t{2}, std::size_t{3}}) {
        for (int trial = 0; trial < 20 && ok; ++trial) {
            const std::size_t p = 1 + rng.below(25);
            ParameterVector honest(p);
            for (auto& v : honest) v = 3.0 * (rng.uniform() - 0.5);
            std::vector<ModelUpdate> updates;
            for (std::size_t i = 0; i < f; ++i) {
                ModelUpdate u;
                u.client_id = static_cast<int>(i) + 1;
                u.params.resize(p);
                for (auto& v : u.params) v = 1e9 * (rng.uniform() - 0.5);
                updates.push_back(std::move(u));
            }
            for (std::size_t i = 0; i <= f; ++i) {
                updates.push_back({static_cast<int>(f + i) + 1, honest, 1});
            }
            if (comed(updates) != honest) ok = false;
        }
    }
    report(10, ok, "f arbitrary + (f+1) identical updates reproduce the identical update "
                   "exactly for f in {1,2,3}");
}

// --- criterion 11: k-anonymity joint frequency -----------------------------

void criterion11() {
    bool ok = true;
    std::ostringstream detail;
    detail << "min joint QI frequency after fit+apply (k=4):";
    for (const std::string preset : {"exp1", "exp2"}) {
        SimulationConfig cfg = make_preset(preset, "clean", "kanon");
        auto [train, test] = split(dataset(cfg.dataset), cfg.train_count,
                                   derive_seed(1, 0, 0, "split"), cfg.test_count);
        KAnonConfig kc = cfg.kanon_cfg;
        kc.k = 4;
        auto mapping = fit_k_anonymity(train, kc);
        auto anon = apply_mapping(train, mapping);
        const std::size_t freq = min_qi_tuple_frequency(anon, kc.quasi_identifiers);
        detail << ' ' << cfg.dataset << ' ' << freq;
        ok = ok && freq >= 4;
    }
    report(11, ok, detail.str());
}

// --- criterion 12: DP release properties -----------------------------------

void criterion12() {
    Rng rng = make_rng(12);
    bool card_ok = true, range_ok = true, topc_ok = true;
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = 5 + rng.below(200);
        ParameterVector global(p), local(p);
        for (auto& v : global) v = rng.gaussian(1.0);
        for (std::size_t i = 0; i < p; ++i) local[i] = global[i] + 5.0 * rng.gaussian(1.0);

        DpConfig cfg;
        cfg.gamma = 2.0;
        cfg.sensitivity = 4.0;
        cfg.release_fraction = 0.1 + 0.4 * rng.uniform();
        cfg.epsilon1 = cfg.epsilon2 = cfg.epsilon3 = 1.0;
        cfg.noise_model = DpNoiseModel::svt_scaled;
        Rng dp_rng(rng.next_u64());
        auto sparse = dp_release(local, global, cfg, dp_rng);

        const auto c = static_cast<std::size_t>(
            std::ceil(cfg.release_fraction * static_cast<double>(p)));
        if (sparse.indices.size() > c) card_ok = false;
        for (double v : sparse.values) {
            if (v < -cfg.gamma || v > cfg.gamma) range_ok = false;
        }

        // noiseless release must be exactly the top-c coordinates by |delta|
        DpConfig exact = cfg;
        exact.epsilon1 = exact.epsilon2 = exact.epsilon3 = kInfiniteEpsilon;
        Rng exact_rng(rng.next_u64());
        auto noiseless = dp_release(local, global, exact, exact_rng);
        std::vector<std::size_t> order(p);
        for (std::size_t i = 0; i < p; ++i) order[i] = i;
        ParameterVector delta(p);
        for (std::size_t i = 0; i < p; ++i) {
            delta[i] = std::clamp(local[i] - global[i], -cfg.gamma, cfg.gamma);
        }
        // clipping saturates many deltas at gamma; ties resolve to the
        // lower index
        std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            const double ma = std::fabs(delta[a]), mb = std::fabs(delta[b]);
            if (ma != mb) return ma > mb;
            return a < b;
        });
        std::set<std::size_t> want(order.begin(), order.begin() + std::min(c, p));
        std::set<std::size_t> got(noiseless.indices.begin(), noiseless.indices.end());
        if (got != want) topc_ok = false;
        for (std::size_t i = 0; i < noiseless.indices.size(); ++i) {
            if (noiseless.values[i] != delta[noiseless.indices[i]]) topc_ok = false;
        }
    }

    // Laplace sampler moments at 1e5 draws
    const double scale = 1.7;
    double mean = 0.0, var = 0.0;
    const int draws = 100000;
    Rng lap_rng = make_rng(1212);
    std::vector<double> xs(draws);
    for (auto& x : xs) x = lap_rng.laplace(scale);
    for (double x : xs) mean += x;
    mean /= draws;
    for (double x : xs) var += (x - mean) * (x - mean);
    var /= draws;
    const bool moments_ok =
        std::fabs(mean) < 0.05 * scale && std::fabs(var - 2.0 * scale * scale) < 0.1 * scale * scale;

    std::ostringstream detail;
    detail << "cardinality " << (card_ok ? "ok" : "violated") << ", range "
           << (range_ok ? "ok" : "violated") << ", noiseless top-c "
           << (topc_ok ? "exact" : "mismatch") << ", laplace moments at 1e5 draws: mean "
           << fmt(mean) << " var " << fmt(var) << " (expect 0, " << fmt(2.0 * scale * scale) << ')';
    report(12, card_ok && range_ok && topc_ok && moments_ok, detail.str());
}

// --- criterion 13: byte-identical CSVs for equal seeds ---------------------

void criterion13() {
    bool ok = true;
    for (const auto& [preset, variant, privacy] :
         {std::tuple<std::string, std::string, std::string>{"exp2", "clean", "dp"},
          std::tuple<std::string, std::string, std::string>{"exp2", "bad_clients", "kanon"}}) {
        SimulationConfig cfg = make_preset(preset, variant, privacy);
        cfg.strategy = Strategy::afa;
        cfg.master_seed = 7;
        const std::string a = metrics_to_csv(run_simulation(cfg, dataset(cfg.dataset)), cfg.strategy);
        const std::string b = metrics_to_csv(run_simulation(cfg, dataset(cfg.dataset)), cfg.strategy);
        if (a != b) ok = false;
    }
    report(13, ok, "repeated runs with equal seeds produce byte-identical CSV metrics");
}

// --- criterion 14: AFA scale invariance ------------------------------------

void criterion14() {
    Rng rng = make_rng(14);
    bool ok = true;
    for (int trial = 0; trial < 50 && ok; ++trial) {
        const std::size_t n = 4 + rng.below(5);
        const std::size_t p = 10 + rng.below(21);
        auto updates = random_updates(rng, n, p, 6.0);
        ParameterVector global(p);
        for (auto& v : global) v = rng.uniform() - 0.5;

        AfaConfig cfg;
        auto scaled = updates;
        for (auto& u : scaled) {
            for (auto& v : u.params) v *= 3.7;
        }
        ParameterVector scaled_global = global;
        for (auto& v : scaled_global) v *= 3.7;

        std::unordered_map<int, ClientProfile> prof_a, prof_b;
        for (const auto& u : updates) {
            prof_a[u.client_id] = ClientProfile{u.client_id, cfg.alpha0, cfg.beta0, false};
            prof_b[u.client_id] = ClientProfile{u.client_id, cfg.alpha0, cfg.beta0, false};
        }
        auto ra = afa_round(updates, global, prof_a, cfg);
        auto rb = afa_round(scaled, scaled_global, prof_b, cfg);
        if (ra.accepted != rb.accepted || ra.rejected != rb.rejected) ok = false;
    }
    report(14, ok, "scaling updates and reference by 3.7 leaves AFA accept/reject sets "
                   "unchanged on 50 random instances");
}

} // namespace

int main() {
    criterion1();
    criterion2();
    criterion3();
    criterion4();
    criterion5();
    criterion6();
    criterion7();
    criterion8();
    criterion9();
    criterion10();
    criterion11();
    criterion12();
    criterion13();
    criterion14();
    std::printf("%d of 14 criteria failed\n", g_failures);
    return g_failures;
}
