// Command-line front end: feature extraction, codebook fitting, training,
// voice conversion and evaluation.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sefvc/sefvc.hpp"

namespace fs = std::filesystem;
using namespace sefvc;

namespace {

std::vector<std::string> list_tensor_files(const std::string& dir) {
    std::vector<std::string> files;
    if (fs::is_regular_file(dir)) {
        files.push_back(dir);
        return files;
    }
    if (!fs::is_directory(dir)) throw std::runtime_error("not a file or directory: " + dir);
    for (const auto& e : fs::directory_iterator(dir))
        if (e.is_regular_file() && e.path().extension() == ".tensor") files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) throw std::runtime_error("no .tensor files in: " + dir);
    return files;
}

std::string read_text_arg(const std::string& arg) {
    if (!arg.empty() && arg[0] == '@') {
        std::ifstream f(arg.substr(1));
        if (!f) throw std::runtime_error("cannot open text file: " + arg.substr(1));
        std::stringstream ss;
        ss << f.rdbuf();
        return ss.str();
    }
    return arg;
}

int cmd_extract_features(const std::string& audio, const std::string& out, int dim) {
    ToyFeatureConfig cfg;
    cfg.out_dim = dim;
    Waveform w = load_waveform(audio);
    save_features(out, extract_toy_features(w, cfg));
    std::cout << "wrote " << out << "\n";
    return 0;
}

int cmd_fit_codebook(const std::string& features_dir, int k, uint64_t seed, const std::string& out) {
    std::vector<FeatureMatrix> features;
    for (const std::string& f : list_tensor_files(features_dir)) features.push_back(load_features(f));
    Codebook cb = fit_codebook(features, k, seed);
    save_codebook(out, cb);
    std::cout << "codebook: k=" << cb.k << " d=" << cb.dim << " iterations=" << cb.iterations
              << " inertia=" << cb.inertia << "\n";
    return 0;
}

int cmd_train(const std::string& manifest_path, const std::string& codebook_path,
              const std::string& config_path, const std::string& out_dir, bool fresh) {
    RunConfig cfg = load_run_config(config_path);
    std::vector<UtteranceData> dataset = load_dataset(load_manifest(manifest_path));
    fs::create_directories(out_dir);
    const std::string latest = out_dir + "/latest.ckpt";

    std::unique_ptr<Trainer> trainer;
    if (!fresh && fs::exists(latest)) {
        trainer = std::make_unique<Trainer>(Trainer::load_checkpoint(latest, std::move(dataset), &cfg));
        std::cout << "resumed from " << latest << " at step " << trainer->step() << "\n";
    } else {
        Codebook cb = load_codebook(codebook_path);
        if (cb.dim != cfg.train.feature_dim)
            throw std::runtime_error("codebook dim " + std::to_string(cb.dim) +
                                     " != feature_dim " + std::to_string(cfg.train.feature_dim));
        trainer = std::make_unique<Trainer>(cfg, std::move(cb), std::move(dataset));
    }

    std::ofstream metrics(out_dir + "/metrics.jsonl", std::ios::app);
    while (trainer->step() < cfg.train.max_steps) {
        StepResult r = trainer->run_step();
        if (r.skipped) continue;
        const int64_t step = trainer->step();
        if (step % cfg.train.log_every == 0 || step == 1) {
            metrics << metrics_json_line(step, r) << "\n";
            metrics.flush();
            std::cout << "step " << step << " g_total=" << r.gen.total << " l_rec=" << r.gen.l_rec
                      << " d_loss=" << r.d_loss << " lr=" << r.lr << "\n";
        }
        if (step % cfg.train.checkpoint_every == 0 || step == cfg.train.max_steps) {
            const std::string path = out_dir + "/checkpoint_" + std::to_string(step) + ".ckpt";
            trainer->save_checkpoint(path);
            fs::copy_file(path, latest, fs::copy_options::overwrite_existing);
            std::cout << "checkpoint " << path << "\n";
        }
    }
    return 0;
}

int cmd_convert(const std::string& source, const std::string& reference, const std::string& checkpoint,
                const std::string& out, const std::string& source_features, bool shuffle_reference,
                uint64_t shuffle_seed) {
    ModelCheckpoint ck = load_model_checkpoint(checkpoint);
    FeatureMatrix feats;
    if (!source_features.empty()) {
        feats = load_features(source_features);
    } else {
        ToyFeatureConfig tf;
        tf.out_dim = ck.codebook.dim;
        feats = extract_toy_features(load_waveform(source), tf);
    }
    Waveform ref = load_waveform(reference);
    ConvertOptions opt;
    opt.shuffle_reference = shuffle_reference;
    opt.shuffle_seed = shuffle_seed;
    Waveform converted = convert_voice(ck.model, ck.codebook, feats, ref, opt);
    save_waveform(out, converted);
    std::cout << "wrote " << out << " (" << converted.size() << " samples, "
              << converted.duration_s() << " s)\n";
    return 0;
}

int cmd_evaluate(const std::string& pairs_path, const std::string& embedder, const std::string& report,
                 bool sweep, const std::string& source, const std::string& source_features,
                 const std::string& reference, const std::string& checkpoint,
                 const std::vector<double>& lengths) {
    nlohmann::json out = nlohmann::json::object();
    if (sweep) {
        if (source.empty() || reference.empty() || checkpoint.empty())
            throw std::runtime_error("sweep mode needs --source, --reference and --checkpoint");
        ModelCheckpoint ck = load_model_checkpoint(checkpoint);
        FeatureMatrix feats;
        if (!source_features.empty()) {
            feats = load_features(source_features);
        } else {
            ToyFeatureConfig tf;
            tf.out_dim = ck.codebook.dim;
            feats = extract_toy_features(load_waveform(source), tf);
        }
        Waveform ref = load_waveform(reference);
        std::vector<double> ref_emb = compute_embedding(embedder, reference);
        nlohmann::json sweep_out = nlohmann::json::array();
        for (double len : lengths) {
            ConvertOptions opt;
            opt.truncate_reference_s = len;
            Waveform converted = convert_voice(ck.model, ck.codebook, feats, ref, opt);
            const fs::path tmp = fs::temp_directory_path() / ("sefvc_sweep_" + std::to_string(len) + ".wav");
            save_waveform(tmp.string(), converted);
            const double secs = cosine_similarity(compute_embedding(embedder, tmp.string()), ref_emb);
            fs::remove(tmp);
            sweep_out.push_back({{"reference_length_s", len}, {"secs", secs}});
            std::cout << "ref " << len << " s -> SECS " << secs << "\n";
        }
        out["sweep"] = sweep_out;
    } else {
        if (pairs_path.empty()) throw std::runtime_error("--pairs required (or use --sweep)");
        std::ifstream f(pairs_path);
        if (!f) throw std::runtime_error("cannot open pairs manifest: " + pairs_path);
        std::vector<std::pair<std::string, std::string>> pairs;
        std::string line;
        while (std::getline(f, line)) {
            if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
            nlohmann::json j = nlohmann::json::parse(line);
            pairs.emplace_back(j.at("a").get<std::string>(), j.at("b").get<std::string>());
        }
        SecsReport rep = evaluate_secs(pairs, embedder);
        nlohmann::json jp = nlohmann::json::array();
        for (const SecsPair& p : rep.pairs) {
            nlohmann::json e = {{"a", p.a}, {"b", p.b}, {"ok", p.ok}};
            if (p.ok) e["secs"] = p.secs;
            else e["error"] = p.error;
            jp.push_back(e);
        }
        out["pairs"] = jp;
        out["mean_secs"] = rep.mean_secs;
        out["failures"] = rep.failures;
        std::cout << "mean SECS " << rep.mean_secs << " over "
                  << rep.pairs.size() - rep.failures << " pairs (" << rep.failures << " failed)\n";
    }
    if (!report.empty()) {
        std::ofstream rf(report);
        rf << out.dump(2) << "\n";
        if (!rf) throw std::runtime_error("cannot write report: " + report);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"SEF-VC: speaker-embedding-free zero-shot voice conversion"};
    app.require_subcommand(1);

    // extract-features
    std::string ef_audio, ef_out;
    int ef_dim = 1024;
    auto* ef = app.add_subcommand("extract-features", "Toy semantic feature extraction from audio");
    ef->add_option("--audio", ef_audio, "input wav")->required();
    ef->add_option("--out", ef_out, "output .tensor file")->required();
    ef->add_option("--dim", ef_dim, "feature dimension");

    // fit-codebook
    std::string fc_features, fc_out;
    int fc_k = 2000;
    uint64_t fc_seed = 0;
    auto* fc = app.add_subcommand("fit-codebook", "K-means codebook over feature files");
    fc->add_option("--features", fc_features, "directory of .tensor feature files")->required();
    fc->add_option("--k", fc_k, "number of centers");
    fc->add_option("--seed", fc_seed, "random seed");
    fc->add_option("--out", fc_out, "output codebook path")->required();

    // train
    std::string tr_manifest, tr_codebook, tr_config, tr_out;
    bool tr_fresh = false;
    auto* tr = app.add_subcommand("train", "Train the model");
    tr->add_option("--manifest", tr_manifest, "JSONL manifest of {audio, features}")->required();
    tr->add_option("--codebook", tr_codebook, "codebook path")->required();
    tr->add_option("--config", tr_config, "key=value config file")->required();
    tr->add_option("--out", tr_out, "output directory")->required();
    tr->add_flag("--fresh", tr_fresh, "ignore existing checkpoints instead of resuming");

    // convert
    std::string cv_source, cv_reference, cv_checkpoint, cv_out, cv_features;
    bool cv_shuffle = false;
    uint64_t cv_shuffle_seed = 0;
    auto* cv = app.add_subcommand("convert", "Convert source speech to the reference timbre");
    cv->add_option("--source", cv_source, "source wav (content)")->required();
    cv->add_option("--reference", cv_reference, "reference wav (timbre)")->required();
    cv->add_option("--checkpoint", cv_checkpoint, "model checkpoint")->required();
    cv->add_option("--out", cv_out, "output wav")->required();
    cv->add_option("--source-features", cv_features, "precomputed source features (.tensor)");
    cv->add_flag("--shuffle-reference", cv_shuffle, "randomly permute reference mel frames (demo)");
    cv->add_option("--shuffle-seed", cv_shuffle_seed, "seed for --shuffle-reference");

    // evaluate
    std::string ev_pairs, ev_embedder, ev_report, ev_source, ev_features, ev_reference, ev_checkpoint;
    bool ev_sweep = false;
    std::vector<double> ev_lengths = {2.0, 3.0, 5.0, 10.0};
    auto* ev = app.add_subcommand("evaluate", "Speaker-similarity (SECS) evaluation");
    ev->add_option("--pairs", ev_pairs, "JSONL pairs manifest {a, b}");
    ev->add_option("--embedder", ev_embedder, "command invoked as `cmd wav out.tensor` (default: toy embedder)");
    ev->add_option("--report", ev_report, "JSON report path");
    ev->add_flag("--sweep", ev_sweep, "reference-length sweep mode");
    ev->add_option("--source", ev_source, "sweep: source wav");
    ev->add_option("--source-features", ev_features, "sweep: precomputed source features");
    ev->add_option("--reference", ev_reference, "sweep: reference wav");
    ev->add_option("--checkpoint", ev_checkpoint, "sweep: model checkpoint");
    ev->add_option("--lengths", ev_lengths, "sweep: reference lengths in seconds")->delimiter(',');

    // embed (subprocess contract: sefvc embed <wav> <out.tensor>)
    std::string em_wav, em_out;
    auto* em = app.add_subcommand("embed", "Toy speaker embedding (mean/std mel statistics)");
    em->add_option("wav", em_wav, "input wav")->required();
    em->add_option("out", em_out, "output .tensor embedding")->required();

    // cer
    std::string cer_ref, cer_hyp;
    auto* ce = app.add_subcommand("cer", "Character error rate between two transcripts (@file or literal)");
    ce->add_option("--reference", cer_ref, "reference transcript")->required();
    ce->add_option("--hypothesis", cer_hyp, "hypothesis transcript")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (*ef) return cmd_extract_features(ef_audio, ef_out, ef_dim);
        if (*fc) return cmd_fit_codebook(fc_features, fc_k, fc_seed, fc_out);
        if (*tr) return cmd_train(tr_manifest, tr_codebook, tr_config, tr_out, tr_fresh);
        if (*cv) return cmd_convert(cv_source, cv_reference, cv_checkpoint, cv_out, cv_features,
                                    cv_shuffle, cv_shuffle_seed);
        if (*ev) return cmd_evaluate(ev_pairs, ev_embedder, ev_report, ev_sweep, ev_source,
                                     ev_features, ev_reference, ev_checkpoint, ev_lengths);
        if (*em) {
            save_embedding(em_out, toy_speaker_embedding(load_waveform(em_wav)));
            return 0;
        }
        if (*ce) {
            std::cout << character_error_rate(read_text_arg(cer_ref), read_text_arg(cer_hyp)) << "\n";
            return 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
