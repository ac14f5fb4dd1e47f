// provtag: streaming provenance-based detection with trainable rule
// parameters. Subcommands: synth, train, detect, eval, gradcheck, ablate, cv.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "provtag/provtag.hpp"

using namespace provtag;

namespace {

RuleConfig resolve_rule_config(const std::string& flag_path) {
    if (!flag_path.empty()) return load_rule_config(flag_path);
    if (const char* env = std::getenv("CAPTAIN_RULE_CONFIG"); env && *env)
        return load_rule_config(env);
    return scenario_rule_config();
}

std::vector<Event> load_trace(const std::string& path) {
    if (path == "-") return read_trace(std::cin, [](size_t line, const std::string& msg) {
        std::cerr << "warning: line " << line << ": " << msg << '\n';
    });
    return read_trace_file(path, [&](size_t line, const std::string& msg) {
        std::cerr << "warning: " << path << ":" << line << ": " << msg << '\n';
    });
}

std::vector<Alarm> load_alarms(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open alarms file: " + path);
    std::vector<Alarm> alarms;
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw ParseError(line_no, std::string("invalid alarm JSON: ") + e.what());
        }
        Alarm a;
        a.ts = j.at("ts").get<int64_t>();
        a.event_uuid = j.at("uuid").get<std::string>();
        const std::string ty = j.at("alarm").get<std::string>();
        bool found = false;
        for (int t = 0; t < 8; ++t)
            if (ty == to_string(static_cast<AlarmType>(t))) {
                a.type = static_cast<AlarmType>(t);
                found = true;
            }
        if (!found) throw ParseError(line_no, "unknown alarm type " + ty);
        a.subj_id = j.at("subj").at("id").get<std::string>();
        a.subj_feature = j.at("subj").at("feature").get<std::string>();
        a.obj_id = j.at("obj").at("id").get<std::string>();
        a.obj_feature = j.at("obj").at("feature").get<std::string>();
        a.f = j.at("f").get<double>();
        a.tag = j.at("tag").get<double>();
        a.thr = j.at("thr").get<double>();
        alarms.push_back(std::move(a));
    }
    return alarms;
}

void write_loss_curve(const std::string& path, const TrainResult& r) {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write loss curve: " + path);
    out << "epoch,loss,event_loss,false_alarm_events\n";
    for (size_t i = 0; i < r.epochs.size(); ++i)
        out << i << ',' << r.epochs[i].loss << ',' << r.epochs[i].event_loss << ','
            << r.epochs[i].false_alarm_events << '\n';
}

struct TrainFlags {
    std::vector<std::string> data;
    std::string labels_path, rule_config, out, curve;
    double lr = 0.01;
    uint32_t epochs = 20;
    double alpha = 0.0, gamma = 0.0, tau = 0.0;
    int heuristic_n = 0;
    std::string subsets = "A,G,T";
    double prune_eps = kDefaultPruneEps;
    double convergence_eps = 1e-4;

    TrainConfig to_config() const {
        TrainConfig cfg;
        cfg.lr = lr;
        cfg.epochs = epochs;
        cfg.coefs = heuristic_n > 0 ? heuristic_coefficients(heuristic_n, heuristic_n)
                                    : RegularizerCoefs{alpha, gamma, tau};
        cfg.tuned = TunedSubsets::parse(subsets);
        cfg.prune_eps = prune_eps;
        cfg.convergence_eps = convergence_eps;
        return cfg;
    }
};

void add_train_flags(CLI::App* cmd, TrainFlags& f, bool require_out) {
    cmd->add_option("--data", f.data, "training trace(s), JSON lines")->required();
    cmd->add_option("--labels", f.labels_path, "labels file (assumption check)");
    cmd->add_option("--rule-config", f.rule_config, "rule config JSON (or $CAPTAIN_RULE_CONFIG)");
    cmd->add_option("--lr", f.lr, "learning rate");
    cmd->add_option("--epochs", f.epochs, "epoch budget");
    cmd->add_option("--alpha", f.alpha, "A-family regularizer coefficient");
    cmd->add_option("--gamma", f.gamma, "G-family regularizer coefficient");
    cmd->add_option("--tau", f.tau, "T-family regularizer coefficient");
    cmd->add_option("--heuristic-n", f.heuristic_n,
                    "derive coefficients from a tolerated false-alarm budget N");
    cmd->add_option("--subsets", f.subsets, "tuned parameter families, e.g. A,G,T");
    cmd->add_option("--prune-eps", f.prune_eps, "gradient pruning threshold");
    cmd->add_option("--convergence-eps", f.convergence_eps, "relative loss-change stop");
    auto* out = cmd->add_option("--out", f.out, "model output path");
    if (require_out) out->required();
    cmd->add_option("--curve", f.curve, "per-epoch loss CSV output");
}

int cmd_synth(const std::string& scenario, uint64_t seed, size_t events, double train_frac,
              const std::string& out, const std::string& labels_out, const std::string& train_out,
              const std::string& test_out, size_t poison, const std::string& poison_ip,
              size_t mimicry) {
    ScenarioConfig cfg;
    cfg.name = scenario;
    cfg.seed = seed;
    cfg.benign_events = events;
    cfg.train_fraction = train_frac;
    GeneratedTrace t = generate(cfg);

    std::vector<std::string> poison_uuids;
    if (poison > 0) {
        t.events = poison_training(t.events, t.train_end, poison_ip, poison, &poison_uuids);
        t.train_end += poison_uuids.size();
    }
    if (mimicry > 0) {
        std::string donor;
        for (const auto& e : t.events)
            if (e.subj.name == "indexer") {
                donor = e.subj.id;
                break;
            }
        t.events = inject_mimicry(t.events, t.attack_proc_id, donor, mimicry);
    }

    write_trace_file(out, t.events);
    if (!labels_out.empty()) save_labels(labels_out, t.labels);
    if (!train_out.empty())
        write_trace_file(train_out,
                         {t.events.begin(), t.events.begin() + static_cast<ptrdiff_t>(t.train_end)});
    if (!test_out.empty())
        write_trace_file(test_out,
                         {t.events.begin() + static_cast<ptrdiff_t>(t.train_end), t.events.end()});
    std::cerr << "synth: " << t.events.size() << " events (" << t.train_end
              << " training), " << t.labels.malicious_events.size() << " labeled malicious\n";
    return 0;
}

int cmd_train(const TrainFlags& f) {
    RuleConfig rc = resolve_rule_config(f.rule_config);
    FeatureInterner feats;
    EdgeInterner edges;
    std::vector<std::vector<Event>> traces;
    for (const auto& p : f.data) traces.push_back(load_trace(p));
    Labels labels;
    if (!f.labels_path.empty()) labels = load_labels(f.labels_path);

    TrainConfig cfg = f.to_config();
    TrainResult r = train(traces, cfg, rc, feats, edges, f.labels_path.empty() ? nullptr : &labels,
                          [](const std::string& m) { std::cerr << "warning: " << m << '\n'; });

    ModelMeta meta;
    meta.config_hash = rule_config_hash(rc);
    meta.epochs = static_cast<uint32_t>(r.epochs.size());
    save_model(f.out, r.params, feats, edges, rc, meta);
    if (!f.curve.empty()) write_loss_curve(f.curve, r);
    std::cerr << "train: " << r.epochs.size() << " epochs, loss "
              << (r.epochs.empty() ? 0.0 : r.epochs.front().loss) << " -> "
              << (r.epochs.empty() ? 0.0 : r.epochs.back().loss)
              << (r.converged ? " (converged)" : "") << '\n';
    return 0;
}

int cmd_detect(const std::string& model_path, const std::string& data, const std::string& alarms_out,
               const std::string& rule_config) {
    RuleConfig rc = resolve_rule_config(rule_config);
    FeatureInterner feats;
    EdgeInterner edges;
    ParamStore params;
    if (!model_path.empty()) params = load_model(model_path, feats, edges);

    std::ofstream out(alarms_out);
    if (!out) throw ConfigError("cannot write alarms file: " + alarms_out);

    Engine engine(feats, edges, params, rc);
    engine.sink = [&](const Alarm& a) { out << alarm_to_json(a).dump() << '\n'; };

    // One verdict per consumed event; nothing is buffered.
    std::ifstream file_in;
    std::istream* in = &std::cin;
    if (data != "-") {
        file_in.open(data);
        if (!file_in) throw ConfigError("cannot open trace file: " + data);
        in = &file_in;
    }
    TraceReader reader(*in, [&](size_t line, const std::string& msg) {
        std::cerr << "warning: line " << line << ": " << msg << '\n';
    });
    while (auto e = reader.next()) engine.process(*e);

    std::cerr << "detect: " << engine.stats().events << " events, " << engine.stats().alarms
              << " alarms on " << engine.stats().alarm_events << " events\n";
    return 0;
}

int cmd_eval(const std::string& alarms_path, const std::string& labels_path, const std::string& data,
             const std::string& baseline_path, bool one_hop, bool grad_stats,
             const std::string& rule_config, const std::string& out_path) {
    Labels labels = load_labels(labels_path);
    std::vector<Alarm> alarms = load_alarms(alarms_path);

    nlohmann::json report;
    std::set<std::string> known;
    FeatureInterner feats;
    EdgeInterner edges;
    RuleConfig rc = resolve_rule_config(rule_config);
    ParamStore defaults;

    std::optional<std::vector<Event>> events;
    if (!data.empty()) {
        events = load_trace(data);
        for (const auto& e : *events) known.insert(e.uuid);
    }

    EventScore es = score_events(alarms, labels, events ? &known : nullptr);
    report["events"] = event_score_to_json(es);

    if (events) {
        EngineOptions opts;
        opts.record_adjacency = true;
        opts.track_gradients = grad_stats;
        Engine engine(feats, edges, defaults, rc, opts);
        for (const auto& e : *events) engine.process(e);
        report["entities"] = entity_score_to_json(score_entities(alarms, labels, engine.graph(), one_hop));
        if (grad_stats) report["gradients"] = gradient_stats_to_json(gradient_stats(engine.graph()));
    }

    if (!baseline_path.empty()) {
        EventScore base = score_events(load_alarms(baseline_path), labels);
        Reduction red = reduction_factor(base.fa_count(), es.fa_count());
        report["reduction"] = {{"baseline_fa", red.baseline_fa},
                               {"trained_fa", red.trained_fa},
                               {"all_removed", red.all_removed},
                               {"factor", red.all_removed ? -1.0 : red.factor}};
    }

    std::cout << "events: " << es.fa_count() << " false-alarm, " << es.tp_count()
              << " true-alarm (" << es.alarms << " alarms)\n";
    for (const auto& step : es.missed_steps) std::cout << "missed step: " << step << '\n';
    if (report.contains("reduction")) {
        const auto& r = report["reduction"];
        std::cout << "reduction: " << r["baseline_fa"] << " -> " << r["trained_fa"];
        if (r["all_removed"].get<bool>())
            std::cout << " (all removed)\n";
        else
            std::cout << " (" << r["factor"].get<double>() << "x)\n";
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot write report: " + out_path);
        out << report.dump(2) << '\n';
    } else {
        std::cout << report.dump(2) << '\n';
    }
    return 0;
}

int cmd_gradcheck(const std::string& data, size_t samples, double h, uint64_t seed, double alpha,
                  double gamma, double tau, const std::string& rule_config,
                  const std::string& out_path) {
    RuleConfig rc = resolve_rule_config(rule_config);
    std::vector<Event> events = load_trace(data);
    FeatureInterner feats;
    EdgeInterner edges;
    GradCheckConfig gc;
    gc.samples = samples;
    gc.h = h;
    gc.seed = seed;
    gc.coefs = {alpha, gamma, tau};
    GradCheckReport report = gradcheck(events, rc, gc, feats, edges);

    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw ConfigError("cannot write gradcheck csv: " + out_path);
        write_gradcheck_csv(out, report);
    } else {
        write_gradcheck_csv(std::cout, report);
    }
    size_t checked = 0;
    for (const auto& c : report.checks)
        if (!c.excluded) ++checked;
    std::cerr << "gradcheck: " << checked << " checked, " << report.excluded << " excluded, "
              << report.failed << " failed\n";
    return report.all_passed() ? 0 : 3;
}

int cmd_ablate(const TrainFlags& f, const std::string& test_path, const std::string& labels_path,
               const std::string& subsets_list) {
    RuleConfig rc = resolve_rule_config(f.rule_config);
    FeatureInterner feats;
    EdgeInterner edges;
    std::vector<std::vector<Event>> traces;
    for (const auto& p : f.data) traces.push_back(load_trace(p));
    std::vector<Event> test_events = load_trace(test_path);
    Labels labels;
    if (!labels_path.empty()) labels = load_labels(labels_path);

    std::vector<std::string> subset_names;
    {
        std::stringstream ss(subsets_list);
        std::string item;
        while (std::getline(ss, item, ';'))
            if (!item.empty()) subset_names.push_back(item);
    }
    if (subset_names.empty()) throw ConfigError("ablate: empty subset list");

    std::cout << "subset,epochs,final_loss,test_fa,test_tp\n";
    for (const auto& name : subset_names) {
        TrainConfig cfg = f.to_config();
        cfg.tuned = TunedSubsets::parse(name);
        if (!cfg.tuned.any()) throw ConfigError("ablate: empty subset '" + name + "'");
        TrainResult r = train(traces, cfg, rc, feats, edges);
        std::vector<Alarm> alarms;
        EngineOptions opts;
        Engine engine(feats, edges, r.params, rc, opts);
        engine.sink = [&](const Alarm& a) { alarms.push_back(a); };
        for (const auto& e : test_events) engine.process(e);
        EventScore es = score_events(alarms, labels);
        std::cout << cfg.tuned.str() << ',' << r.epochs.size() << ','
                  << (r.epochs.empty() ? 0.0 : r.epochs.back().loss) << ',' << es.fa_count() << ','
                  << es.tp_count() << '\n';
    }
    return 0;
}

int cmd_cv(const TrainFlags& f, uint32_t k, double window_frac) {
    RuleConfig rc = resolve_rule_config(f.rule_config);
    FeatureInterner feats;
    EdgeInterner edges;
    std::vector<Event> events = load_trace(f.data.at(0));
    TrainConfig cfg = f.to_config();
    auto folds = time_series_cv(events, k, window_frac, cfg, rc, feats, edges);

    std::cout << "fold,window_begin,window_end,epochs,final_loss,validation_events,validation_fa,selected\n";
    for (size_t i = 0; i < folds.size(); ++i) {
        const CvFold& fold = folds[i];
        std::cout << i << ',' << fold.window_begin << ',' << fold.window_end << ','
                  << fold.result.epochs.size() << ','
                  << (fold.result.epochs.empty() ? 0.0 : fold.result.epochs.back().loss) << ','
                  << fold.validation_events << ',' << fold.validation_false_alarms << ','
                  << (fold.selected ? 1 : 0) << '\n';
        if (fold.selected && !f.out.empty()) {
            ModelMeta meta;
            meta.config_hash = rule_config_hash(rc);
            meta.epochs = static_cast<uint32_t>(fold.result.epochs.size());
            save_model(f.out, fold.result.params, feats, edges, rc, meta);
        }
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"streaming provenance detection engine with trainable rule parameters"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a labeled synthetic trace");
    std::string sc_name = "grey_nodes", sc_out, sc_labels, sc_train_out, sc_test_out;
    std::string sc_poison_ip = "203.0.113.66";
    uint64_t sc_seed = 1;
    size_t sc_events = 8000, sc_poison = 0, sc_mimicry = 0;
    double sc_frac = 0.6;
    synth->add_option("--scenario", sc_name,
                      "grey_nodes | dependency_explosion | custom_alarm | poisoning");
    synth->add_option("--seed", sc_seed, "rng seed");
    synth->add_option("--events", sc_events, "approximate benign event count");
    synth->add_option("--train-frac", sc_frac, "fraction of benign events in the training split");
    synth->add_option("--out", sc_out, "trace output (JSON lines)")->required();
    synth->add_option("--labels", sc_labels, "labels output");
    synth->add_option("--train-out", sc_train_out, "training-split trace output");
    synth->add_option("--test-out", sc_test_out, "test-split trace output");
    synth->add_option("--poison-events", sc_poison, "poison the training prefix with N events");
    synth->add_option("--poison-ip", sc_poison_ip, "IP used by poison events and the attack");
    synth->add_option("--mimicry", sc_mimicry, "append N mimicry events after the attack");

    // train
    auto* train_cmd = app.add_subcommand("train", "learn parameters from benign traces");
    TrainFlags tf;
    add_train_flags(train_cmd, tf, /*require_out=*/true);

    // detect
    auto* detect_cmd = app.add_subcommand("detect", "streaming detection over a trace");
    std::string d_model, d_data = "-", d_alarms, d_rc;
    detect_cmd->add_option("--model", d_model, "model JSON (omit for conservative defaults)");
    detect_cmd->add_option("--data", d_data, "trace path or - for stdin")->required();
    detect_cmd->add_option("--alarms", d_alarms, "alarm output (JSON lines)")->required();
    detect_cmd->add_option("--rule-config", d_rc, "rule config JSON");

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "score alarms against labels");
    std::string e_alarms, e_labels, e_data, e_baseline, e_rc, e_out;
    bool e_one_hop = false, e_grad_stats = false;
    eval_cmd->add_option("--alarms", e_alarms, "alarm JSON lines")->required();
    eval_cmd->add_option("--labels", e_labels, "labels file")->required();
    eval_cmd->add_option("--data", e_data, "trace (enables entity scoring and uuid checks)");
    eval_cmd->add_option("--baseline-alarms", e_baseline, "baseline alarms for the reduction factor");
    eval_cmd->add_flag("--one-hop", e_one_hop, "exclude FP entities one hop from ground truth");
    eval_cmd->add_flag("--grad-stats", e_grad_stats, "report gradient-storage statistics");
    eval_cmd->add_option("--rule-config", e_rc, "rule config JSON");
    eval_cmd->add_option("--out", e_out, "report JSON output (default stdout)");

    // gradcheck
    auto* gc_cmd = app.add_subcommand("gradcheck", "finite-difference gradient oracle");
    std::string g_data, g_rc, g_out;
    size_t g_samples = 200;
    double g_h = 1e-4, g_alpha = 0.0, g_gamma = 0.0, g_tau = 0.0;
    uint64_t g_seed = 7;
    gc_cmd->add_option("--data", g_data, "trace to replay")->required();
    gc_cmd->add_option("--samples", g_samples, "target checks across the three families");
    gc_cmd->add_option("--h", g_h, "central-difference step");
    gc_cmd->add_option("--seed", g_seed, "sampling seed");
    gc_cmd->add_option("--alpha", g_alpha, "A regularizer coefficient");
    gc_cmd->add_option("--gamma", g_gamma, "G regularizer coefficient");
    gc_cmd->add_option("--tau", g_tau, "T regularizer coefficient");
    gc_cmd->add_option("--rule-config", g_rc, "rule config JSON");
    gc_cmd->add_option("--out", g_out, "CSV output (default stdout)");

    // ablate
    auto* ab_cmd = app.add_subcommand("ablate", "train per parameter subset and compare");
    TrainFlags af;
    std::string ab_test, ab_labels, ab_subsets = "A;G;T;A,G;A,T;G,T;A,G,T";
    add_train_flags(ab_cmd, af, /*require_out=*/false);
    ab_cmd->add_option("--test", ab_test, "held-out test trace")->required();
    ab_cmd->add_option("--test-labels", ab_labels, "labels for the test trace");
    ab_cmd->add_option("--ablate-subsets", ab_subsets, "semicolon-separated subset list");

    // cv
    auto* cv_cmd = app.add_subcommand("cv", "time-series cross-validation");
    TrainFlags cf;
    uint32_t cv_k = 3;
    double cv_frac = 2.0 / 3.0;
    add_train_flags(cv_cmd, cf, /*require_out=*/false);
    cv_cmd->add_option("--k", cv_k, "number of folds");
    cv_cmd->add_option("--window-frac", cv_frac, "training window fraction");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*synth)
            return cmd_synth(sc_name, sc_seed, sc_events, sc_frac, sc_out, sc_labels, sc_train_out,
                             sc_test_out, sc_poison, sc_poison_ip, sc_mimicry);
        if (*train_cmd) return cmd_train(tf);
        if (*detect_cmd) return cmd_detect(d_model, d_data, d_alarms, d_rc);
        if (*eval_cmd)
            return cmd_eval(e_alarms, e_labels, e_data, e_baseline, e_one_hop, e_grad_stats, e_rc,
                            e_out);
        if (*gc_cmd)
            return cmd_gradcheck(g_data, g_samples, g_h, g_seed, g_alpha, g_gamma, g_tau, g_rc, g_out);
        if (*ab_cmd) return cmd_ablate(af, ab_test, ab_labels, ab_subsets);
        if (*cv_cmd) return cmd_cv(cf, cv_k, cv_frac);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }
    return 0;
}
