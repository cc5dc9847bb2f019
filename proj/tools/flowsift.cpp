// Single pipeline entry point. Every stage reads/writes plain text
// artifacts whose first line carries provenance (config hash, seed, input
// hashes) so any output can be reproduced from its header.
#include <CLI11.hpp>
#include <fstream>
#include <iostream>
#include <sstream>

#include "flowsift/augment.hpp"
#include "flowsift/autoencoder.hpp"
#include "flowsift/bench.hpp"
#include "flowsift/config.hpp"
#include "flowsift/density.hpp"
#include "flowsift/detector.hpp"
#include "flowsift/flows.hpp"
#include "flowsift/relabel.hpp"

using namespace flowsift;

namespace {

std::string hex64(std::uint64_t v) {
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

std::uint64_t file_hash(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a(ss.str());
}

/// Provenance string embedded in every output artifact.
std::string provenance(const config::PipelineConfig& cfg, std::uint64_t seed,
                       const std::vector<std::string>& inputs) {
    std::ostringstream out;
    out << "config=" << hex64(config_hash(cfg)) << " seed=" << seed;
    for (const auto& p : inputs) out << " in:" << p << "=" << hex64(file_hash(p));
    return out.str();
}

config::PipelineConfig load_config(const std::string& path) {
    if (path.empty()) return config::parse_config_text("");
    return config::parse_config(path);
}

std::vector<flows::LengthSequence> tokenize_all(
    const std::vector<flows::LabeledFlow>& lf, const config::PipelineConfig& cfg) {
    std::vector<flows::LengthSequence> seqs;
    seqs.reserve(lf.size());
    for (const auto& f : lf)
        seqs.push_back(flows::tokenize(f.flow, cfg.flows.n, cfg.flows.max_len));
    return seqs;
}

// --------------------------------------------------------------- synth

int cmd_synth(const std::string& config_path, std::uint64_t seed, int train_size,
              double noise_ratio, const std::string& noise_mode,
              const std::string& train_out, const std::string& test_out) {
    auto cfg = load_config(config_path);
    bench::CorpusConfig cc;
    cc.normal_templates = cfg.bench.normal_templates;
    cc.malicious_templates = cfg.bench.malicious_templates;
    cc.drifted_templates = cfg.bench.drifted_templates;
    cc.normal_jitter = cfg.bench.normal_jitter;
    cc.malicious_jitter = cfg.bench.malicious_jitter;
    cc.train_normal = train_size;
    cc.train_malicious = train_size;
    cc.test_normal = cfg.bench.test_normal;
    cc.test_malicious = cfg.bench.test_malicious;
    cc.n = cfg.flows.n;
    cc.max_len = cfg.flows.max_len;
    cc.seed = seed;
    auto corpus = bench::synth_corpus(cc);

    bench::NoiseSpec spec;
    spec.ratio = noise_ratio;
    spec.mode = bench::noise_mode_from_string(noise_mode);
    if (spec.mode == bench::NoiseMode::Template)
        spec.withheld = {corpus.malicious_template_ids.front(),
                         corpus.normal_template_ids.front()};
    bench::inject_noise(corpus.train, spec, derive_seed(seed, 1));

    auto to_flows = [](const std::vector<bench::BenchSample>& v, bool noisy) {
        std::vector<flows::LabeledFlow> out;
        for (const auto& s : v)
            out.push_back({s.flow, noisy ? s.noisy_label : s.true_label});
        return out;
    };
    auto prov = provenance(cfg, seed, {});
    flows::save_flow_file(to_flows(corpus.train, true), train_out, prov);
    flows::save_flow_file(to_flows(corpus.test, false), test_out, prov);
    log_line("synth", "info",
             "wrote " + std::to_string(corpus.train.size()) + " train and " +
                 std::to_string(corpus.test.size()) + " test flows");
    return 0;
}

// -------------------------------------------------------------- ingest

int cmd_ingest(const std::string& packets_path, const std::string& out) {
    auto packets = flows::load_packet_file(packets_path);
    auto assembled = flows::assemble_flows(packets);
    std::vector<flows::LabeledFlow> lf;
    for (auto& f : assembled) lf.push_back({std::move(f), std::nullopt});
    flows::save_flow_file(lf, out,
                          "in:" + packets_path + "=" + hex64(file_hash(packets_path)));
    log_line("ingest", "info",
             "assembled " + std::to_string(lf.size()) + " flows from " +
                 std::to_string(packets.size()) + " packets");
    return 0;
}

// ------------------------------------------------------------- extract

int cmd_extract(const std::string& config_path, std::uint64_t seed,
                const std::string& flows_path, const std::string& model_in,
                const std::string& model_out, const std::string& features_out) {
    auto cfg = load_config(config_path);
    auto lf = flows::load_flow_file(flows_path);
    auto seqs = tokenize_all(lf, cfg);

    autoencoder::AeModel model;
    if (!model_in.empty()) {
        model = autoencoder::AeModel::load(model_in);
    } else {
        autoencoder::AeSpec spec = cfg.ae_spec;
        spec.L = static_cast<int>(cfg.flows.max_len) + 1;
        spec.n = cfg.flows.n;
        model = autoencoder::train_ae(seqs, spec, cfg.ae_train, seed);
    }
    auto prov = provenance(cfg, seed, {flows_path});
    if (!model_out.empty()) model.save(model_out, prov);

    auto feats = model.encode_batch(seqs);
    std::vector<autoencoder::FeatureRecord> recs(feats.size());
    for (std::size_t i = 0; i < feats.size(); ++i) {
        recs[i].id = "f" + std::to_string(i);
        recs[i].label = lf[i].label.value_or(0);
        recs[i].features = feats[i];
    }
    autoencoder::save_feature_file(recs, features_out, prov);
    log_line("extract", "info",
             "encoded " + std::to_string(recs.size()) + " flows into " + features_out);
    return 0;
}

// ------------------------------------------------------------- correct

std::vector<relabel::LabeledSample> to_samples(
    const std::vector<autoencoder::FeatureRecord>& recs) {
    std::vector<relabel::LabeledSample> D(recs.size());
    for (std::size_t i = 0; i < recs.size(); ++i) {
        D[i].id = recs[i].id;
        D[i].features = recs[i].features;
        D[i].noisy_label = recs[i].label;
        D[i].true_label = recs[i].true_label;
    }
    return D;
}

int cmd_correct(const std::string& config_path, std::uint64_t seed,
                const std::string& features_path, const std::string& out,
                const std::string& report_out) {
    auto cfg = load_config(config_path);
    auto recs = autoencoder::load_feature_file(features_path);
    if (recs.empty()) throw Error("no feature records in '" + features_path + "'");
    auto D = to_samples(recs);

    relabel::CorrectionConfig ccfg;
    ccfg.alpha = cfg.relabel.alpha;
    ccfg.density = cfg.density.made(static_cast<int>(D[0].features.size()));
    auto result = relabel::correct_labels(D, ccfg, seed);
    for (const auto& w : result.warnings) log_line("correct", "warn", w);

    auto prov = provenance(cfg, seed, {features_path});
    for (std::size_t i = 0; i < recs.size(); ++i) recs[i].label = result.corrected[i];
    autoencoder::save_feature_file(recs, out, prov);

    if (!report_out.empty())
        relabel::save_correction_report(result, D, report_out, prov);
    std::size_t changed = 0;
    for (std::size_t i = 0; i < D.size(); ++i)
        if (result.corrected[i] != D[i].noisy_label) ++changed;
    log_line("correct", "info",
             "relabeled " + std::to_string(changed) + " of " +
                 std::to_string(D.size()) + " samples");
    return 0;
}

// ------------------------------------------------------------- augment

int cmd_augment(const std::string& config_path, std::uint64_t seed,
                const std::string& features_path, const std::string& out) {
    auto cfg = load_config(config_path);
    auto recs = autoencoder::load_feature_file(features_path);
    if (recs.empty()) throw Error("no feature records in '" + features_path + "'");
    std::vector<Vec> normal, malicious;
    for (const auto& r : recs)
        (r.label == 0 ? normal : malicious).push_back(r.features);
    if (normal.empty() || malicious.empty())
        throw Error("augment requires both classes in '" + features_path + "'");

    const int d = static_cast<int>(recs[0].features.size());
    auto p_normal = density::fit_density(normal, cfg.density.made(d),
                                         derive_seed(seed, 1));
    auto p_malicious = density::fit_density(malicious, cfg.density.made(d),
                                            derive_seed(seed, 2));
    auto thresholds = augment::resolve_thresholds(
        p_normal, p_malicious, normal, malicious, cfg.augment.gamma_pct,
        {cfg.augment.omega1_pct, cfg.augment.omega2_pct, cfg.augment.omega3_pct});
    int per_region = cfg.augment.per_region;
    if (per_region == 0)
        per_region = std::max<int>(
            1, static_cast<int>(std::min(normal.size(), malicious.size()) / 3));
    auto batch = augment::synthesize(normal, malicious, p_normal, p_malicious,
                                     thresholds, cfg.augment.eta, per_region,
                                     cfg.augment.gan, derive_seed(seed, 3));
    augment::save_synthetic_file(batch, out, provenance(cfg, seed, {features_path}));
    log_line("augment", "info",
             "synthesized " + std::to_string(batch.vectors.size()) + " samples");
    return 0;
}

/// Synthetic-batch reader (id,label,values,region per line).
void load_synthetic(const std::string& path, std::vector<Vec>& X,
                    std::vector<int>& y) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open synthetic file '" + path + "'");
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> fields;
        std::string cur;
        for (char c : line) {
            if (c == ',') { fields.push_back(cur); cur.clear(); }
            else cur.push_back(c);
        }
        fields.push_back(cur);
        if (fields.size() != 4)
            throw Error("synthetic file line " + std::to_string(lineno) +
                        ": expected 4 fields");
        y.push_back(std::stoi(fields[1]));
        std::istringstream vs(fields[2]);
        std::vector<double> vals;
        double v = 0;
        while (vs >> v) vals.push_back(v);
        X.push_back(Eigen::Map<Vec>(vals.data(), static_cast<Eigen::Index>(vals.size())));
    }
}

// --------------------------------------------------------------- train

int cmd_train(const std::string& config_path, std::uint64_t seed,
              const std::string& features_path, const std::string& synthetic_path,
              bool plain, const std::string& model_out) {
    auto cfg = load_config(config_path);
    auto recs = autoencoder::load_feature_file(features_path);
    std::vector<Vec> X;
    std::vector<int> y;
    for (const auto& r : recs) {
        X.push_back(r.features);
        y.push_back(r.label);
    }
    std::vector<std::string> inputs{features_path};
    if (!synthetic_path.empty()) {
        load_synthetic(synthetic_path, X, y);
        inputs.push_back(synthetic_path);
    }
    auto model = plain ? detector::train_plain(X, y, cfg.detector, seed)
                       : detector::train_detector(X, y, cfg.detector, seed);
    model.save(model_out, provenance(cfg, seed, inputs));
    log_line("train", "info",
             "trained on " + std::to_string(X.size()) + " samples -> " + model_out);
    return 0;
}

// ------------------------------------------------------------- predict

int cmd_predict(const std::string& model_path, const std::string& features_path,
                const std::string& out) {
    auto model = detector::DetectorModel::load(model_path);
    auto recs = autoencoder::load_feature_file(features_path);
    std::vector<std::string> ids;
    std::vector<Vec> X;
    for (const auto& r : recs) {
        ids.push_back(r.id);
        X.push_back(r.features);
    }
    auto preds = model.predict(X);
    detector::save_predictions(ids, preds, out,
                               "in:" + features_path + "=" +
                                   hex64(file_hash(features_path)) + " in:" +
                                   model_path + "=" + hex64(file_hash(model_path)));
    log_line("predict", "info",
             "scored " + std::to_string(preds.size()) + " samples -> " + out);
    return 0;
}

// ------------------------------------------------------------ evaluate

int cmd_evaluate(const std::string& predictions_path, const std::string& truth_path,
                 const std::string& out) {
    std::ifstream in(predictions_path);
    if (!in) throw Error("cannot open predictions '" + predictions_path + "'");
    std::vector<std::string> pred_ids;
    std::vector<int> preds;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line[0] == '#') continue;
        auto c1 = line.find(',');
        auto c2 = line.rfind(',');
        if (c1 == std::string::npos || c2 == c1)
            throw Error("predictions line " + std::to_string(lineno) +
                        ": expected id,score,label");
        pred_ids.push_back(line.substr(0, c1));
        preds.push_back(std::stoi(line.substr(c2 + 1)));
    }
    auto truth_recs = autoencoder::load_feature_file(truth_path);
    std::vector<std::string> truth_ids;
    std::vector<int> truth;
    for (const auto& r : truth_recs) {
        truth_ids.push_back(r.id);
        truth.push_back(r.true_label.value_or(r.label));
    }
    auto m = bench::compute_metrics(pred_ids, preds, truth_ids, truth);
    std::ostringstream report;
    report << "tp=" << m.tp << " fp=" << m.fp << " fn=" << m.fn << " tn=" << m.tn
           << "\nprecision=" << m.precision << "\nrecall=" << m.recall
           << "\nf1=" << m.f1 << "\n";
    std::cout << report.str();
    if (!out.empty()) {
        std::ofstream of(out);
        if (!of) throw Error("cannot write '" + out + "'");
        of << "# in:" << predictions_path << "=" << hex64(file_hash(predictions_path))
           << " in:" << truth_path << "=" << hex64(file_hash(truth_path)) << "\n"
           << report.str();
    }
    return 0;
}

// ---------------------------------------------------------- experiment

int cmd_experiment(const std::string& config_path, std::vector<int> sizes,
                   std::vector<double> ratios, std::vector<std::string> modes,
                   std::vector<std::uint64_t> seeds, bool no_augment,
                   bool no_control, const std::string& out) {
    auto cfg = load_config(config_path);
    bench::ExperimentGrid grid;
    if (!sizes.empty()) grid.train_sizes = std::move(sizes);
    if (!ratios.empty()) grid.noise_ratios = std::move(ratios);
    if (!seeds.empty()) grid.seeds = std::move(seeds);
    if (!modes.empty()) {
        grid.modes.clear();
        for (const auto& m : modes) grid.modes.push_back(bench::noise_mode_from_string(m));
    }
    grid.augment = !no_augment;
    grid.plain_control = !no_control;

    auto table = bench::result_table(bench::run_experiment(grid, cfg));
    if (out.empty()) {
        std::cout << table;
    } else {
        std::ofstream of(out);
        if (!of) throw Error("cannot write '" + out + "'");
        of << "# config=" << hex64(config_hash(cfg)) << "\n" << table;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Encrypted-traffic malicious flow detection pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::uint64_t seed = 1;
    app.add_option("--config", config_path, "Configuration file (key = value sections)");
    app.add_option("--seed", seed, "Master seed for the invoked stage");

    // synth
    auto* synth = app.add_subcommand("synth", "Generate a synthetic labeled corpus");
    int train_size = 500;
    double noise_ratio = 0.0;
    std::string noise_mode = "symmetric";
    std::string train_out = "train.flows", test_out = "test.flows";
    synth->add_option("--train-size", train_size, "Training flows per class");
    synth->add_option("--noise-ratio", noise_ratio, "Training label noise in [0, 0.5)");
    synth->add_option("--noise-mode", noise_mode, "symmetric or template");
    synth->add_option("--train-out", train_out, "Training flow file");
    synth->add_option("--test-out", test_out, "Test flow file (clean labels)");

    // ingest
    auto* ingest = app.add_subcommand("ingest", "Assemble packet records into flows");
    std::string packets_path, ingest_out = "flows.txt";
    ingest->add_option("--packets", packets_path, "Packet CSV file")->required();
    ingest->add_option("--out", ingest_out, "Output flow file");

    // extract
    auto* extract = app.add_subcommand("extract", "Train/apply the sequence autoencoder");
    std::string flows_path, model_in, model_out, features_out = "features.txt";
    extract->add_option("--flows", flows_path, "Input flow file")->required();
    extract->add_option("--model-in", model_in, "Reuse an existing encoder checkpoint");
    extract->add_option("--model-out", model_out, "Save the encoder checkpoint");
    extract->add_option("--features-out", features_out, "Output feature file");

    // correct
    auto* correct = app.add_subcommand("correct", "Density-guided label correction");
    std::string corr_in, corr_out = "corrected.txt", report_out;
    correct->add_option("--features", corr_in, "Input feature file")->required();
    correct->add_option("--out", corr_out, "Corrected feature file");
    correct->add_option("--report-out", report_out,
                        "Per-sample relabeling report with a summary block");

    // augment
    auto* augment_cmd = app.add_subcommand("augment", "GAN augmentation in target regions");
    std::string aug_in, aug_out = "synthetic.txt";
    augment_cmd->add_option("--features", aug_in, "Corrected feature file")->required();
    augment_cmd->add_option("--out", aug_out, "Synthetic sample file");

    // train
    auto* train = app.add_subcommand("train", "Train the co-teaching detector");
    std::string train_features, train_synth, det_out = "detector.txt";
    bool plain = false;
    train->add_option("--features", train_features, "Training feature file")->required();
    train->add_option("--synthetic", train_synth, "Optional synthetic sample file");
    train->add_flag("--plain", plain, "Single-network control instead of co-teaching");
    train->add_option("--model-out", det_out, "Detector checkpoint");

    // predict
    auto* predict = app.add_subcommand("predict", "Score flows with a trained detector");
    std::string pred_model, pred_features, pred_out = "predictions.txt";
    predict->add_option("--model", pred_model, "Detector checkpoint")->required();
    predict->add_option("--features", pred_features, "Feature file")->required();
    predict->add_option("--out", pred_out, "Prediction file (id,score,label)");

    // evaluate
    auto* evaluate = app.add_subcommand("evaluate", "Precision/recall/F1 against truth");
    std::string eval_preds, eval_truth, eval_out;
    evaluate->add_option("--predictions", eval_preds, "Prediction file")->required();
    evaluate->add_option("--truth", eval_truth, "Feature file carrying true labels")
        ->required();
    evaluate->add_option("--out", eval_out, "Optional metrics file");

    // experiment
    auto* experiment = app.add_subcommand("experiment", "Full end-to-end grid run");
    std::vector<int> sizes;
    std::vector<double> ratios;
    std::vector<std::string> modes;
    std::vector<std::uint64_t> exp_seeds;
    bool no_augment = false, no_control = false;
    std::string exp_out;
    experiment->add_option("--train-sizes", sizes, "Per-class training sizes");
    experiment->add_option("--noise-ratios", ratios, "Label noise ratios");
    experiment->add_option("--modes", modes, "Noise modes (symmetric/template)");
    experiment->add_option("--seeds", exp_seeds, "Seeds (one pipeline run each)");
    experiment->add_flag("--no-augment", no_augment, "Skip GAN augmentation");
    experiment->add_flag("--no-control", no_control, "Skip the plain-training control");
    experiment->add_option("--out", exp_out, "Result table file (default stdout)");

    CLI11_PARSE(app, argc, argv);

    try {
        if (synth->parsed())
            return cmd_synth(config_path, seed, train_size, noise_ratio, noise_mode,
                             train_out, test_out);
        if (ingest->parsed()) return cmd_ingest(packets_path, ingest_out);
        if (extract->parsed())
            return cmd_extract(config_path, seed, flows_path, model_in, model_out,
                               features_out);
        if (correct->parsed())
            return cmd_correct(config_path, seed, corr_in, corr_out, report_out);
        if (augment_cmd->parsed())
            return cmd_augment(config_path, seed, aug_in, aug_out);
        if (train->parsed())
            return cmd_train(config_path, seed, train_features, train_synth, plain,
                             det_out);
        if (predict->parsed()) return cmd_predict(pred_model, pred_features, pred_out);
        if (evaluate->parsed()) return cmd_evaluate(eval_preds, eval_truth, eval_out);
        if (experiment->parsed())
            return cmd_experiment(config_path, sizes, ratios, modes, exp_seeds,
                                  no_augment, no_control, exp_out);
    } catch (const std::exception& e) {
        log_line("cli", "error", e.what());
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
