#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "CLI11.hpp"
#include "json.hpp"

#include "mqc/conditioning.hpp"
#include "mqc/corpus.hpp"
#include "mqc/estimate.hpp"
#include "mqc/eval.hpp"
#include "mqc/qc.hpp"
#include "mqc/train.hpp"
#include "mqc/volume_io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Peak resident set from /proc, in MiB; -1 where unavailable.
double peak_rss_mib() {
    std::ifstream in("/proc/self/status");
    std::string line;
    while (std::getline(in, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            std::istringstream ss(line.substr(6));
            double kb = 0;
            ss >> kb;
            return kb / 1024.0;
        }
    }
    return -1.0;
}

struct ResourceTimer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    std::vector<std::string> outputs;

    void track(const std::string& path) { outputs.push_back(path); }

    void report(const std::string& task) const {
        const double wall =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::uintmax_t bytes = 0;
        for (const auto& p : outputs) {
            std::error_code ec;
            const auto s = fs::file_size(p, ec);
            if (!ec) bytes += s;
        }
        const json j{{"task", task},
                     {"wall_s", wall},
                     {"peak_rss_mib", peak_rss_mib()},
                     {"bytes_written", bytes}};
        std::cerr << j.dump() << "\n";
    }
};

std::vector<std::string> split_csv(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

std::vector<int> parse_ks(const std::string& s) {
    std::vector<int> ks;
    for (const auto& tok : split_csv(s)) ks.push_back(std::stoi(tok));
    return ks;
}

std::vector<mqc::SubjectMeta> load_subjects_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mqc::IoError("cannot open metadata file: " + path);
    json j;
    in >> j;
    std::vector<mqc::SubjectMeta> out;
    for (const auto& s : j) {
        mqc::SubjectMeta m;
        m.volume_id = s.at("volume_id").get<std::string>();
        m.sex = mqc::sex_from_string(s.value("sex", "unknown"));
        if (s.contains("age")) m.age = s.at("age").get<double>();
        out.push_back(m);
    }
    return out;
}

mqc::RegressorConfig load_regressor_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw mqc::IoError("cannot open config file: " + path);
    json j;
    in >> j;
    mqc::RegressorConfig c;
    if (j.contains("encoder")) {
        const auto& e = j["encoder"];
        c.encoder.stem_pool = e.value("stem_pool", c.encoder.stem_pool);
        if (e.contains("channels")) c.encoder.channels = e["channels"].get<std::vector<int>>();
        c.encoder.blocks_per_stage = e.value("blocks_per_stage", c.encoder.blocks_per_stage);
        c.encoder.residual = e.value("residual", c.encoder.residual);
    }
    c.conditioned = j.value("conditioned", c.conditioned);
    c.d_g = j.value("d_g", c.d_g);
    c.attn_hidden = j.value("attn_hidden", c.attn_hidden);
    c.lr = j.value("lr", c.lr);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.slices_per_record = j.value("slices_per_record", c.slices_per_record);
    return c;
}

int run(int argc, char** argv) {
    CLI::App app{"mask quality estimation toolkit"};
    app.require_subcommand(1);

    std::uint64_t seed = 0;
    int threads = 0;
    std::string global_config;
    app.add_option("--seed", seed, "global random seed")->capture_default_str();
    app.add_option("--threads", threads, "OpenMP thread count (0 = runtime default)");
    app.add_option("--config", global_config,
                   "config JSON for the subcommand (synth: generator, train: regressor)");

    // --- synth ---
    auto* synth = app.add_subcommand("synth", "generate a synthetic degradation corpus");
    std::string synth_out, synth_config, synth_classes;
    int synth_volumes = -1, synth_test_volumes = -1;
    synth->add_option("--out", synth_out, "corpus directory")->required();
    synth->add_option("--config", synth_config, "generator config JSON");
    synth->add_option("--volumes", synth_volumes, "override volume count");
    synth->add_option("--test-volumes", synth_test_volumes, "override test volume count");
    synth->add_option("--classes", synth_classes, "override class names (comma separated)");

    // --- embed ---
    auto* embed = app.add_subcommand("embed", "build or validate an embedding table");
    std::string embed_out, embed_provider = "one_hot", embed_template = "[CLS]";
    std::string embed_corpus, embed_classes_arg, embed_file;
    int embed_dim = 32;
    embed->add_option("--out", embed_out, "table output path")->required();
    embed->add_option("--provider", embed_provider, "one_hot | hash_fallback | precomputed_file");
    embed->add_option("--template", embed_template, "prompt template with [CLS]");
    embed->add_option("--corpus", embed_corpus, "corpus directory providing the vocabulary");
    embed->add_option("--classes", embed_classes_arg, "class names (comma separated)");
    embed->add_option("--file", embed_file, "precomputed embedding file");
    embed->add_option("--dim", embed_dim, "hash_fallback dimension");

    // --- train ---
    auto* train_cmd = app.add_subcommand("train", "train the quality regressor");
    std::string train_corpus, train_table, train_out, train_config;
    double train_lambda = 1.0, train_xi = 0.05;
    int train_epochs = -1, train_batch = -1, train_slices = -1;
    double train_lr = -1.0;
    bool train_uncond = false;
    train_cmd->add_option("--corpus", train_corpus, "corpus directory")->required();
    train_cmd->add_option("--table", train_table, "embedding table")->required();
    train_cmd->add_option("--out", train_out, "checkpoint directory")->required();
    train_cmd->add_option("--config", train_config, "regressor config JSON");
    train_cmd->add_option("--lambda", train_lambda, "ranking loss weight")->capture_default_str();
    train_cmd->add_option("--xi", train_xi, "ranking margin")->capture_default_str();
    train_cmd->add_option("--epochs", train_epochs, "override epochs");
    train_cmd->add_option("--batch", train_batch, "override batch size");
    train_cmd->add_option("--lr", train_lr, "override learning rate");
    train_cmd->add_option("--slices", train_slices, "override slices per record");
    train_cmd->add_flag("--unconditioned", train_uncond, "drop the condition module");

    // --- estimate ---
    auto* est = app.add_subcommand("estimate", "predict mask quality");
    std::string est_ckpt, est_table, est_corpus, est_split = "test";
    std::string est_image, est_mask, est_out;
    int est_class = 0, est_slices = mqc::kDefaultEstimateSlices;
    est->add_option("--checkpoint", est_ckpt, "model checkpoint")->required();
    est->add_option("--table", est_table, "embedding table (defaults to table.json next to the checkpoint)");
    est->add_option("--corpus", est_corpus, "score a corpus directory");
    est->add_option("--split", est_split, "corpus split: train | test | all");
    est->add_option("--image", est_image, "single volume image path");
    est->add_option("--mask", est_mask, "single binary mask path");
    est->add_option("--class-id", est_class, "class id for the single mask");
    est->add_option("--out", est_out, "output records JSONL")->required();
    est->add_option("--slices", est_slices, "slices per volume (0 = all)")->capture_default_str();

    // --- eval-metrics ---
    auto* ev = app.add_subcommand("eval-metrics", "correlation and ranking metrics");
    std::string ev_records, ev_out, ev_scatter, ev_ks = "5,10";
    ev->add_option("--records", ev_records, "QualityRecord JSONL")->required();
    ev->add_option("--out", ev_out, "report JSON")->required();
    ev->add_option("--scatter", ev_scatter, "scatter CSV (predicted, actual, class)");
    ev->add_option("--ks", ev_ks, "comma separated k values")->capture_default_str();

    // --- report ---
    auto* rep = app.add_subcommand("report", "dataset quality report with bias tests");
    std::string rep_records, rep_meta, rep_corpus, rep_out, rep_csv, rep_groupings = "sex,age";
    double rep_threshold = 0.8;
    rep->add_option("--records", rep_records, "QualityRecord JSONL")->required();
    rep->add_option("--meta", rep_meta, "subject metadata JSON");
    rep->add_option("--corpus", rep_corpus, "corpus directory providing metadata");
    rep->add_option("--out", rep_out, "report JSON")->required();
    rep->add_option("--csv", rep_csv, "per-organ CSV");
    rep->add_option("--threshold", rep_threshold, "inadequate-quality threshold")
        ->capture_default_str();
    rep->add_option("--groupings", rep_groupings, "bias groupings")->capture_default_str();

    // --- select ---
    auto* sel = app.add_subcommand("select", "rank volumes for annotation or self-training");
    std::string sel_method = "quality", sel_goal = "annotate", sel_records, sel_probs_dir,
                sel_out;
    int sel_n = 0;
    sel->add_option("--method", sel_method, "quality | entropy | mc_dropout | random")
        ->capture_default_str();
    sel->add_option("--goal", sel_goal, "annotate (worst first) | pseudo (best first)")
        ->capture_default_str();
    sel->add_option("--n", sel_n, "selection size")->required();
    sel->add_option("--records", sel_records, "QualityRecord JSONL (quality, random)");
    sel->add_option("--probs-dir", sel_probs_dir,
                    "directory of probability volumes (entropy, mc_dropout)");
    sel->add_option("--out", sel_out, "output id list (one per line)");

    CLI11_PARSE(app, argc, argv);

#ifdef _OPENMP
    if (threads > 0) omp_set_num_threads(threads);
#endif

    if (synth_config.empty()) synth_config = global_config;
    if (train_config.empty()) train_config = global_config;

    if (*synth) {
        ResourceTimer timer;
        mqc::GeneratorConfig cfg;
        if (!synth_config.empty()) {
            std::ifstream in(synth_config);
            if (!in) throw mqc::IoError("cannot open config: " + synth_config);
            json j;
            in >> j;
            cfg.n_volumes = j.value("n_volumes", cfg.n_volumes);
            cfg.n_test_volumes = j.value("n_test_volumes", cfg.n_test_volumes);
            if (j.contains("class_names"))
                cfg.class_names = j["class_names"].get<std::vector<std::string>>();
            cfg.noise_sd = j.value("noise_sd", cfg.noise_sd);
            cfg.background_hu = j.value("background_hu", cfg.background_hu);
        }
        if (synth_volumes > 0) cfg.n_volumes = synth_volumes;
        if (synth_test_volumes >= 0) cfg.n_test_volumes = synth_test_volumes;
        if (!synth_classes.empty()) cfg.class_names = split_csv(synth_classes);
        const auto manifest = mqc::build_corpus(cfg, seed, synth_out);
        timer.track((fs::path(synth_out) / "manifest.json").string());
        std::cout << json{{"records", manifest.records.size()},
                          {"volumes", manifest.subjects.size()},
                          {"manifest", (fs::path(synth_out) / "manifest.json").string()}}
                         .dump()
                  << "\n";
        timer.report("synth");
        return 0;
    }

    if (*embed) {
        mqc::ClassVocabulary vocab;
        if (!embed_corpus.empty()) {
            const auto manifest =
                mqc::load_manifest((fs::path(embed_corpus) / "manifest.json").string());
            vocab = manifest.vocabulary;
        } else if (!embed_classes_arg.empty()) {
            vocab = mqc::ClassVocabulary::from_names(split_csv(embed_classes_arg));
        } else {
            throw mqc::ValueError("embed needs --corpus or --classes");
        }
        mqc::EmbedOptions opts;
        opts.prompt_template = embed_template;
        opts.table_file = embed_file;
        opts.hash_dim = embed_dim;
        opts.seed = seed;
        const auto table = mqc::embed_classes(
            vocab, mqc::embedding_provider_from_string(embed_provider), opts);
        mqc::save_embedding_table(table, embed_out);
        std::cout << json{{"classes", table.embeddings.size()}, {"d_t", table.d_t}}.dump()
                  << "\n";
        return 0;
    }

    if (*train_cmd) {
        ResourceTimer timer;
        const auto manifest =
            mqc::load_manifest((fs::path(train_corpus) / "manifest.json").string());
        const auto table = mqc::load_embedding_table(train_table);
        mqc::RegressorConfig cfg;
        if (!train_config.empty()) cfg = load_regressor_config(train_config);
        if (train_epochs > 0) cfg.epochs = train_epochs;
        if (train_batch > 0) cfg.batch_size = train_batch;
        if (train_lr > 0) cfg.lr = train_lr;
        if (train_slices > 0) cfg.slices_per_record = train_slices;
        if (train_uncond) cfg.conditioned = false;
        mqc::LossConfig loss_cfg{train_lambda, train_xi};

        mqc::TrainOptions opts;
        opts.checkpoint_dir = train_out;
        opts.log_path = (fs::path(train_out) / "train_log.jsonl").string();
        fs::create_directories(train_out);
        const auto result = mqc::train(manifest, table, cfg, loss_cfg, seed, opts);
        mqc::save_embedding_table(table, (fs::path(train_out) / "table.json").string());
        timer.track((fs::path(train_out) / "final.mqckpt").string());
        timer.track(opts.log_path);
        std::cout << json{{"samples", result.n_samples},
                          {"epochs", cfg.epochs},
                          {"first_epoch_loss", result.epoch_mean_loss.front()},
                          {"final_epoch_loss", result.epoch_mean_loss.back()},
                          {"checkpoint", (fs::path(train_out) / "final.mqckpt").string()}}
                         .dump()
                  << "\n";
        timer.report("train");
        return 0;
    }

    if (*est) {
        ResourceTimer timer;
        const auto model = mqc::load_checkpoint(est_ckpt);
        const std::string table_path =
            est_table.empty() ? (fs::path(est_ckpt).parent_path() / "table.json").string()
                              : est_table;
        const auto table = mqc::load_embedding_table(table_path);
        std::vector<mqc::QualityRecord> records;
        if (!est_corpus.empty()) {
            const auto manifest =
                mqc::load_manifest((fs::path(est_corpus) / "manifest.json").string());
            const std::string split = est_split == "all" ? "" : est_split;
            records = mqc::estimate_manifest(manifest, table, model, split, est_slices);
        } else {
            if (est_image.empty() || est_mask.empty() || est_class < 1)
                throw mqc::ValueError("estimate needs --corpus or --image/--mask/--class-id");
            const auto image = mqc::load_volume(est_image, mqc::guess_format(est_image));
            auto mask = mqc::load_mask(est_mask, mqc::guess_format(est_mask));
            if (!mask.is_binary()) mask = mqc::binarize(mask, est_class);
            records.push_back(
                mqc::estimate_volume(image, mask, est_class, table, model, est_slices));
        }
        mqc::save_quality_records(records, est_out);
        timer.track(est_out);
        std::cout << json{{"records", records.size()}, {"out", est_out}}.dump() << "\n";
        timer.report("estimate");
        return 0;
    }

    if (*ev) {
        const auto records = mqc::load_quality_records(ev_records);
        const auto report = mqc::eval_suite(records, parse_ks(ev_ks));
        mqc::save_eval_report(report, ev_out);
        if (!ev_scatter.empty()) mqc::save_scatter_csv(records, ev_scatter);
        json summary{{"out", ev_out}};
        if (report.overall_lcc) summary["overall_lcc"] = *report.overall_lcc;
        if (report.overall_srocc) summary["overall_srocc"] = *report.overall_srocc;
        for (const auto& [k, v] : report.map) summary["map@" + std::to_string(k)] = v;
        std::cout << summary.dump() << "\n";
        return 0;
    }

    if (*rep) {
        const auto records = mqc::load_quality_records(rep_records);
        std::vector<mqc::SubjectMeta> meta;
        if (!rep_meta.empty()) {
            meta = load_subjects_json(rep_meta);
        } else if (!rep_corpus.empty()) {
            meta = mqc::load_manifest((fs::path(rep_corpus) / "manifest.json").string())
                       .subjects;
        } else {
            throw mqc::ValueError("report needs --meta or --corpus");
        }
        const auto report = mqc::dataset_report(records, meta, rep_threshold,
                                                split_csv(rep_groupings), seed);
        mqc::save_dataset_report(report, rep_out);
        if (!rep_csv.empty()) mqc::save_dataset_report_csv(report, rep_csv);
        std::cout << json{{"overall_mean", report.overall_mean},
                          {"fraction_below", report.fraction_below},
                          {"out", rep_out}}
                         .dump()
                  << "\n";
        return 0;
    }

    if (*sel) {
        ResourceTimer timer;
        const auto method = mqc::selector_method_from_string(sel_method);
        std::vector<mqc::SelectorScore> scores;
        switch (method) {
            case mqc::SelectorMethod::quality: {
                if (sel_records.empty()) throw mqc::ValueError("quality selection needs --records");
                scores = mqc::quality_scores(mqc::load_quality_records(sel_records));
                break;
            }
            case mqc::SelectorMethod::random: {
                if (sel_records.empty()) throw mqc::ValueError("random selection needs --records");
                std::vector<std::string> ids;
                for (const auto& s : mqc::quality_scores(mqc::load_quality_records(sel_records)))
                    ids.push_back(s.volume_id);
                scores = mqc::random_scores(ids, seed);
                break;
            }
            case mqc::SelectorMethod::entropy: {
                if (sel_probs_dir.empty())
                    throw mqc::ValueError("entropy selection needs --probs-dir");
                std::vector<std::string> files;
                for (const auto& e : fs::directory_iterator(sel_probs_dir))
                    if (e.path().extension() == ".mqv") files.push_back(e.path().string());
                std::sort(files.begin(), files.end());
                for (const auto& f : files)
                    scores.push_back(
                        mqc::entropy_score(mqc::load_volume(f, mqc::VolumeFormat::portable)));
                break;
            }
            case mqc::SelectorMethod::mc_dropout: {
                if (sel_probs_dir.empty())
                    throw mqc::ValueError("mc_dropout selection needs --probs-dir");
                std::map<std::string, std::vector<mqc::Volume>> passes;
                std::vector<std::string> files;
                for (const auto& e : fs::directory_iterator(sel_probs_dir))
                    if (e.path().extension() == ".mqv") files.push_back(e.path().string());
                std::sort(files.begin(), files.end());
                for (const auto& f : files) {
                    auto v = mqc::load_volume(f, mqc::VolumeFormat::portable);
                    passes[v.id].push_back(std::move(v));
                }
                for (const auto& [vid, vols] : passes)
                    scores.push_back(mqc::mc_dropout_score(vols));
                break;
            }
        }
        const auto chosen = sel_goal == "pseudo" ? mqc::select_pseudo_labels(scores, sel_n)
                                                 : mqc::select_for_annotation(scores, sel_n);
        std::ostringstream body;
        for (const auto& id : chosen) body << id << "\n";
        if (!sel_out.empty()) {
            std::ofstream out(sel_out, std::ios::trunc);
            if (!out) throw mqc::IoError("cannot write selection: " + sel_out);
            out << body.str();
            timer.track(sel_out);
        } else {
            std::cout << body.str();
        }
        timer.report("select");
        return 0;
    }

    return 1;
}

} // namespace

int main(int argc, char** argv) {
    try {
        return run(argc, argv);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
}
