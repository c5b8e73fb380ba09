// ukdh command-line front end: synthesize data, train teacher/students,
// distill pair sets, evaluate, or run the whole pipeline from a JSON config.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "ukdh/dataset.hpp"
#include "ukdh/distill.hpp"
#include "ukdh/errors.hpp"
#include "ukdh/retrieval.hpp"
#include "ukdh/student.hpp"
#include "ukdh/teacher.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ukdh;

namespace {

constexpr int kExitValidation = 2;
constexpr int kExitStage = 3;

[[noreturn]] void fail_validation(const std::string& msg) {
    std::cerr << "error: " << msg << "\n";
    std::exit(kExitValidation);
}

TrainConfig train_config_from_json(const json& j, const TrainConfig& defaults) {
    TrainConfig c = defaults;
    c.learning_rate = j.value("learning_rate", c.learning_rate);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.epochs = j.value("epochs", c.epochs);
    c.margin = j.value("margin", c.margin);
    c.seed = j.value("seed", c.seed);
    c.negative_samples = j.value("negative_samples", c.negative_samples);
    if (c.epochs < 0 || c.batch_size < 1 || c.negative_samples < 1)
        fail_validation("bad training config: epochs/batch_size/negative_samples");
    return c;
}

NegativeStrategy parse_strategy(const std::string& s) {
    if (s == "uniform") return NegativeStrategy::uniform;
    if (s == "hard") return NegativeStrategy::hard;
    fail_validation("strategy must be 'uniform' or 'hard'");
}

Direction parse_direction(const std::string& s) {
    if (s == "i2t") return Direction::image_to_text;
    if (s == "t2i") return Direction::text_to_image;
    fail_validation("direction must be 'i2t' or 't2i'");
}

StudentKind parse_kind(const std::string& s) {
    if (s == "us") return StudentKind::unsupervised;
    if (s == "ss") return StudentKind::supervised;
    fail_validation("student kind must be 'us' or 'ss'");
}

// ---------------------------------------------------------------- synth

int cmd_synth(int pairs, int classes, int d_img, int d_txt, double noise, uint64_t seed,
              const std::string& out_dir) {
    if (pairs < 2) fail_validation("--pairs must be at least 2");
    if (classes < 2) fail_validation("--classes must be at least 2");
    if (d_img < 1 || d_txt < 1) fail_validation("feature dimensions must be positive");
    if (noise < 0.0) fail_validation("--noise must be non-negative");
    try {
        fs::create_directories(out_dir);
        SyntheticResult r = generate_synthetic(pairs, classes, d_img, d_txt, noise, seed);
        save_features(r.dataset, (fs::path(out_dir) / "features.ukdf").string());
        save_labels(r.labels, (fs::path(out_dir) / "labels.ukdl").string());
    } catch (const std::exception& e) {
        std::cerr << "synth failed: " << e.what() << "\n";
        return kExitStage;
    }
    std::cout << "wrote " << out_dir << "/features.ukdf and labels.ukdl (" << pairs
              << " pairs)\n";
    return 0;
}

// ---------------------------------------------------------- train-teacher

int cmd_train_teacher(const std::string& features, const std::string& out, int hidden, int bits,
                      const TrainConfig& cfg, NegativeStrategy strategy,
                      const std::string& pairs_csv, const std::string& log_csv) {
    PairedDataset ds;
    RelevantPairSet pairs;
    try {
        ds = load_features(features);
        if (!pairs_csv.empty()) pairs = load_pairs_csv(pairs_csv);
    } catch (const std::exception& e) {
        fail_validation(e.what());
    }
    try {
        TrainLog log;
        TwoPathwayModel m = train_teacher(ds, cfg, hidden, bits, strategy, &log,
                                          pairs_csv.empty() ? nullptr : &pairs);
        save_model(m, out);
        if (!log_csv.empty()) log.save_csv(log_csv);
        if (log.diverged) {
            std::cerr << "training diverged; last finite checkpoint saved\n";
            return kExitStage;
        }
    } catch (const std::exception& e) {
        std::cerr << "train-teacher failed: " << e.what() << "\n";
        return kExitStage;
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

// ----------------------------------------------------------------- distill

int cmd_distill(const std::string& features, const std::string& model_path, int k_img, int k_txt,
                std::optional<int> budget, std::optional<int> per_instance,
                const std::string& out) {
    if (budget.has_value() == per_instance.has_value())
        fail_validation("give exactly one of --budget and --per-instance-k");
    PairedDataset ds;
    TwoPathwayModel model;
    try {
        ds = load_features(features);
        model = load_model(model_path);
    } catch (const std::exception& e) {
        fail_validation(e.what());
    }
    try {
        DistillParams p;
        p.k_img = k_img;
        p.k_txt = k_txt;
        p.total_budget = budget;
        p.per_instance_k = per_instance;
        RelevantPairSet pairs = build_relevant_pairs(model, ds, p);
        save_pairs_csv(pairs, out);
        std::cout << "wrote " << out << " (" << pairs.pairs.size() << " pairs)\n";
    } catch (const std::exception& e) {
        std::cerr << "distill failed: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}

// ------------------------------------------------------------ train-student

int cmd_train_student(const std::string& features, const std::string& pairs_csv,
                      StudentKind kind, const std::string& out, int hidden, int bits,
                      const TrainConfig& cfg, const std::string& log_csv) {
    PairedDataset ds;
    RelevantPairSet pairs;
    try {
        ds = load_features(features);
        pairs = load_pairs_csv(pairs_csv);
    } catch (const std::exception& e) {
        fail_validation(e.what());
    }
    try {
        TrainLog log;
        TwoPathwayModel m =
            kind == StudentKind::supervised
                ? train_student_supervised(ds, pairs, cfg, hidden, bits, &log)
                : train_student_unsupervised(ds, pairs, cfg, hidden, bits,
                                             NegativeStrategy::hard, &log);
        save_model(m, out);
        if (!log_csv.empty()) log.save_csv(log_csv);
        if (log.diverged) {
            std::cerr << "training diverged; last finite checkpoint saved\n";
            return kExitStage;
        }
    } catch (const std::exception& e) {
        std::cerr << "train-student failed: " << e.what() << "\n";
        return kExitStage;
    }
    std::cout << "wrote " << out << "\n";
    return 0;
}

// -------------------------------------------------------------------- eval

std::vector<int> parse_k_list(const std::string& s) {
    std::vector<int> ks;
    size_t pos = 0;
    while (pos < s.size()) {
        size_t comma = s.find(',', pos);
        if (comma == std::string::npos) comma = s.size();
        try {
            ks.push_back(std::stoi(s.substr(pos, comma - pos)));
        } catch (const std::exception&) {
            fail_validation("bad --k-list entry");
        }
        pos = comma + 1;
    }
    if (ks.empty()) fail_validation("--k-list must not be empty");
    return ks;
}

int cmd_eval(const std::string& model_path, const std::string& features,
             const std::string& labels_path, int query_size, uint64_t split_seed,
             const std::string& direction_str, const std::string& k_list_str,
             const std::string& out_json, const std::string& out_curve) {
    Direction direction = parse_direction(direction_str);
    std::vector<int> k_list = parse_k_list(k_list_str);
    PairedDataset ds;
    LabelSet labels;
    TwoPathwayModel model;
    try {
        ds = load_features(features);
        labels = load_labels(labels_path);
        model = load_model(model_path);
    } catch (const std::exception& e) {
        fail_validation(e.what());
    }
    if (query_size < 1 || query_size >= ds.n())
        fail_validation("--query-size must be in [1, n)");
    try {
        SplitSpec split = make_split(ds.n(), query_size, split_seed);
        EvalReport rep = evaluate_cross_modal(model, ds, labels, split, direction, k_list);
        save_eval_report(rep, out_json, out_curve);
        std::printf("%s k=%d mAP=%.4f\n", direction_name(direction), rep.k_bits, rep.map);
    } catch (const std::exception& e) {
        std::cerr << "eval failed: " << e.what() << "\n";
        return kExitStage;
    }
    return 0;
}

// ---------------------------------------------------------------- pipeline

struct PipelineConfig {
    fs::path out_dir;
    // dataset: either synthetic params or file paths
    bool synthetic = false;
    int n_pairs = 0, n_classes = 0, d_img = 0, d_txt = 0;
    double noise = 0.0;
    uint64_t data_seed = 0;
    std::string features_path, labels_path;

    int query_size = 0;
    uint64_t split_seed = 0;

    int teacher_bits = 32, teacher_hidden = 128;
    TrainConfig teacher_cfg;
    NegativeStrategy teacher_strategy = NegativeStrategy::hard;

    int k_img = 10, k_txt = 10;
    std::optional<int> per_instance_k;  // unsupervised student selection
    std::optional<int> total_budget;    // supervised student selection

    std::vector<StudentKind> kinds;
    std::vector<int> student_bits;
    int student_hidden = 64;
    TrainConfig us_cfg, ss_cfg;

    int generations = 1;
    std::vector<int> eval_k_list{50};
};

PipelineConfig parse_pipeline_config(const std::string& path, const std::string& out_override) {
    std::ifstream is(path);
    if (!is) fail_validation("cannot open config " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        fail_validation(std::string("config is not valid JSON: ") + e.what());
    }

    PipelineConfig c;
    c.out_dir = out_override.empty() ? j.value("output_dir", std::string("experiment"))
                                     : out_override;

    if (!j.contains("dataset")) fail_validation("config needs a 'dataset' section");
    const json& d = j["dataset"];
    if (d.contains("synthetic")) {
        const json& s = d["synthetic"];
        c.synthetic = true;
        c.n_pairs = s.value("pairs", 2000);
        c.n_classes = s.value("classes", 8);
        c.d_img = s.value("dim_image", 64);
        c.d_txt = s.value("dim_text", 32);
        c.noise = s.value("noise", 0.35);
        c.data_seed = s.value("seed", uint64_t(7));
        if (c.n_pairs < 2 || c.n_classes < 2) fail_validation("bad synthetic dataset spec");
    } else {
        c.features_path = d.value("features", "");
        c.labels_path = d.value("labels", "");
        if (c.features_path.empty() || c.labels_path.empty())
            fail_validation("dataset needs either 'synthetic' or 'features'+'labels'");
        if (!fs::exists(c.features_path)) fail_validation("missing " + c.features_path);
        if (!fs::exists(c.labels_path)) fail_validation("missing " + c.labels_path);
    }

    const json& sp = j.value("split", json::object());
    c.query_size = sp.value("query_size", 400);
    c.split_seed = sp.value("seed", uint64_t(1));
    if (c.query_size < 1) fail_validation("split.query_size must be positive");

    TrainConfig teacher_defaults;
    teacher_defaults.epochs = 30;
    const json& t = j.value("teacher", json::object());
    c.teacher_bits = t.value("bits", 32);
    c.teacher_hidden = t.value("hidden", 128);
    c.teacher_cfg = train_config_from_json(t.value("train", json::object()), teacher_defaults);
    c.teacher_strategy = parse_strategy(t.value("strategy", std::string("hard")));

    const json& di = j.value("distill", json::object());
    c.k_img = di.value("k_img", 10);
    c.k_txt = di.value("k_txt", 10);
    if (di.contains("per_instance_k")) c.per_instance_k = di["per_instance_k"].get<int>();
    if (di.contains("total_budget")) c.total_budget = di["total_budget"].get<int>();
    if (!c.per_instance_k && !c.total_budget) c.per_instance_k = c.k_img + c.k_txt;
    if (c.k_img < 1 || c.k_txt < 1) fail_validation("distill.k_img/k_txt must be positive");

    const json& st = j.value("students", json::object());
    for (const auto& k : st.value("kinds", std::vector<std::string>{"us", "ss"}))
        c.kinds.push_back(parse_kind(k));
    c.student_bits = st.value("bits", std::vector<int>{16});
    c.student_hidden = st.value("hidden", 64);
    TrainConfig us_defaults;
    us_defaults.epochs = 80;
    TrainConfig ss_defaults;
    ss_defaults.epochs = 40;
    ss_defaults.margin = 1.5;
    c.us_cfg = train_config_from_json(st.value("us_train", json::object()), us_defaults);
    c.ss_cfg = train_config_from_json(st.value("ss_train", json::object()), ss_defaults);
    if (c.kinds.empty() || c.student_bits.empty())
        fail_validation("students.kinds and students.bits must not be empty");

    c.generations = j.value("generations", 1);
    if (c.generations < 1) fail_validation("generations must be at least 1");
    c.eval_k_list = j.value("eval_k_list", std::vector<int>{50});

    for (int b : c.student_bits)
        if (b > c.teacher_bits)
            std::cerr << "warning: student bits " << b << " exceed teacher bits "
                      << c.teacher_bits << "\n";
    return c;
}

struct StageWriter {
    std::vector<json> lines;
    fs::path root;

    // runs body unless every output already exists (stage resume)
    template <typename F>
    void stage(const std::string& name, const std::vector<fs::path>& outputs, F body) {
        bool done = !outputs.empty();
        for (const auto& o : outputs)
            if (!fs::exists(o)) done = false;
        if (done) {
            std::cout << "skip " << name << " (outputs present)\n";
        } else {
            std::cout << "run  " << name << "\n";
            try {
                body();
            } catch (const std::exception& e) {
                std::cerr << "stage '" << name << "' failed: " << e.what() << "\n";
                std::exit(kExitStage);
            }
        }
        json rec;
        rec["stage"] = name;
        std::vector<std::string> rel;
        for (const auto& o : outputs) rel.push_back(fs::relative(o, root).generic_string());
        rec["outputs"] = rel;
        lines.push_back(rec);
    }
};

int cmd_pipeline(const std::string& config_path, const std::string& out_override) {
    PipelineConfig c = parse_pipeline_config(config_path, out_override);
    fs::create_directories(c.out_dir);

    StageWriter w;
    w.root = c.out_dir;

    // --- data
    fs::path feat = c.synthetic ? c.out_dir / "data" / "features.ukdf" : fs::path(c.features_path);
    fs::path labf = c.synthetic ? c.out_dir / "data" / "labels.ukdl" : fs::path(c.labels_path);
    if (c.synthetic) {
        w.stage("data", {feat, labf}, [&] {
            fs::create_directories(c.out_dir / "data");
            SyntheticResult r = generate_synthetic(c.n_pairs, c.n_classes, c.d_img, c.d_txt,
                                                   c.noise, c.data_seed);
            save_features(r.dataset, feat.string());
            save_labels(r.labels, labf.string());
        });
    }
    PairedDataset ds = load_features(feat.string());
    LabelSet labels = load_labels(labf.string());
    if (c.query_size >= ds.n()) fail_validation("split.query_size must be below dataset size");
    long max_pairs = long(ds.n() - c.query_size) * long(ds.n() - c.query_size - 1);
    if (c.total_budget && *c.total_budget > max_pairs)
        fail_validation("distill.total_budget exceeds available ordered pairs");

    SplitSpec split = make_split(ds.n(), c.query_size, c.split_seed);
    PairedDataset train_ds = subset_dataset(ds, split.retrieval_indices);

    // --- GEN-0 teacher
    fs::path gen0 = c.out_dir / "gen0";
    fs::path teacher_path = gen0 / "teacher.ukdm";
    w.stage("teacher", {teacher_path, gen0 / "train_log.csv"}, [&] {
        fs::create_directories(gen0);
        TrainLog log;
        TwoPathwayModel m = train_teacher(train_ds, c.teacher_cfg, c.teacher_hidden,
                                          c.teacher_bits, c.teacher_strategy, &log);
        if (log.diverged) throw Error(ErrorCode::divergence, "teacher training diverged");
        save_model(m, teacher_path.string());
        log.save_csv((gen0 / "train_log.csv").string());
    });
    TwoPathwayModel teacher = load_model(teacher_path.string());

    for (Direction dir : {Direction::image_to_text, Direction::text_to_image}) {
        std::string tag = direction_name(dir);
        fs::path jp = gen0 / ("eval_" + tag + ".json");
        fs::path cp = gen0 / ("curve_" + tag + ".csv");
        w.stage("teacher-eval-" + tag, {jp, cp}, [&] {
            EvalReport rep = evaluate_cross_modal(teacher, ds, labels, split, dir, c.eval_k_list);
            save_eval_report(rep, jp.string(), cp.string());
        });
    }

    // --- student generation chains, one per kind
    for (StudentKind kind : c.kinds) {
        std::string kname = student_kind_name(kind);
        TwoPathwayModel prev = teacher;
        for (int gen = 1; gen <= c.generations; ++gen) {
            fs::path gdir = c.out_dir / kname / ("gen" + std::to_string(gen));
            fs::path pairs_path = gdir / "pairs.csv";
            w.stage(kname + "-gen" + std::to_string(gen) + "-distill", {pairs_path}, [&] {
                fs::create_directories(gdir);
                DistillParams p;
                p.k_img = c.k_img;
                p.k_txt = c.k_txt;
                if (kind == StudentKind::supervised && c.total_budget)
                    p.total_budget = c.total_budget;
                else
                    p.per_instance_k = c.per_instance_k ? c.per_instance_k
                                                        : std::optional<int>(c.k_img + c.k_txt);
                RelevantPairSet pairs = build_relevant_pairs(prev, train_ds, p);
                save_pairs_csv(pairs, pairs_path.string());
            });
            RelevantPairSet pairs = load_pairs_csv(pairs_path.string());

            for (size_t bi = 0; bi < c.student_bits.size(); ++bi) {
                int bits = c.student_bits[bi];
                std::string mtag = "k" + std::to_string(bits);
                fs::path model_path = gdir / ("model_" + mtag + ".ukdm");
                w.stage(kname + "-gen" + std::to_string(gen) + "-train-" + mtag, {model_path},
                        [&] {
                            const TrainConfig& cfg =
                                kind == StudentKind::supervised ? c.ss_cfg : c.us_cfg;
                            TrainLog log;
                            TwoPathwayModel m =
                                kind == StudentKind::supervised
                                    ? train_student_supervised(train_ds, pairs, cfg,
                                                               c.student_hidden, bits, &log)
                                    : train_student_unsupervised(train_ds, pairs, cfg,
                                                                 c.student_hidden, bits,
                                                                 NegativeStrategy::hard, &log);
                            if (log.diverged)
                                throw Error(ErrorCode::divergence, "student training diverged");
                            save_model(m, model_path.string());
                            log.save_csv((gdir / ("train_log_" + mtag + ".csv")).string());
                        });
                TwoPathwayModel student = load_model(model_path.string());
                for (Direction dir : {Direction::image_to_text, Direction::text_to_image}) {
                    std::string tag = direction_name(dir);
                    fs::path jp = gdir / ("eval_" + mtag + "_" + tag + ".json");
                    fs::path cp = gdir / ("curve_" + mtag + "_" + tag + ".csv");
                    w.stage(kname + "-gen" + std::to_string(gen) + "-eval-" + mtag + "-" + tag,
                            {jp, cp}, [&] {
                                EvalReport rep = evaluate_cross_modal(student, ds, labels, split,
                                                                      dir, c.eval_k_list);
                                save_eval_report(rep, jp.string(), cp.string());
                            });
                }
                // the first listed bit width carries the chain to the next generation
                if (bi == 0) prev = student;
            }
        }
    }

    // manifest rewritten in full each run so reruns are byte-identical
    std::ofstream mf(c.out_dir / "manifest.jsonl", std::ios::binary);
    json header;
    header["stage"] = "config";
    header["teacher_bits"] = c.teacher_bits;
    header["student_bits"] = c.student_bits;
    header["generations"] = c.generations;
    header["eval_k_list"] = c.eval_k_list;
    std::vector<std::string> kind_names;
    for (StudentKind k : c.kinds) kind_names.push_back(student_kind_name(k));
    header["kinds"] = kind_names;
    header["features"] = fs::relative(feat, c.out_dir).generic_string();
    header["labels"] = fs::relative(labf, c.out_dir).generic_string();
    header["query_size"] = c.query_size;
    header["split_seed"] = c.split_seed;
    header["distill_k_img"] = c.k_img;
    header["distill_k_txt"] = c.k_txt;
    mf << header.dump() << "\n";
    for (const auto& line : w.lines) mf << line.dump() << "\n";

    std::cout << "pipeline complete: " << c.out_dir.string() << "\n";
    return 0;
}

// ------------------------------------------------------------------ report

int cmd_report(const std::string& dir, const std::string& out_csv) {
    fs::path root(dir);
    fs::path manifest = root / "manifest.jsonl";
    if (!fs::exists(manifest)) fail_validation("no manifest.jsonl in " + dir);

    std::ifstream mf(manifest);
    json header;
    std::vector<json> stages;
    std::string line;
    while (std::getline(mf, line)) {
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            fail_validation(std::string("corrupt manifest: ") + e.what());
        }
        if (j.value("stage", "") == "config")
            header = j;
        else
            stages.push_back(j);
    }
    if (header.is_null()) fail_validation("manifest has no config line");

    std::ofstream os(out_csv.empty() ? (root / "summary.csv").string() : out_csv);
    if (!os) fail_validation("cannot write summary CSV");
    os << "generation,kind,k_bits,direction,map";
    std::vector<int> eval_ks = header.value("eval_k_list", std::vector<int>{});
    for (int k : eval_ks) os << ",p_at_" << k;
    os << "\n";
    char buf[64];

    auto emit_row = [&](int gen, const std::string& kind, const fs::path& json_path) {
        if (!fs::exists(json_path)) return;
        EvalReport rep = load_eval_report(json_path.string());
        os << gen << "," << kind << "," << rep.k_bits << "," << direction_name(rep.direction);
        std::snprintf(buf, sizeof(buf), ",%.6f", rep.map);
        os << buf;
        for (int k : eval_ks) {
            auto it = rep.precision_at.find(k);
            std::snprintf(buf, sizeof(buf), ",%.6f", it == rep.precision_at.end() ? 0.0 : it->second);
            os << buf;
        }
        os << "\n";
    };

    for (const std::string& tag : {"i2t", "t2i"})
        emit_row(0, "teacher", root / "gen0" / ("eval_" + tag + ".json"));
    int generations = header.value("generations", 1);
    std::vector<int> bits = header.value("student_bits", std::vector<int>{});
    for (const auto& kind : header.value("kinds", std::vector<std::string>{}))
        for (int gen = 1; gen <= generations; ++gen)
            for (int b : bits)
                for (const std::string& tag : {"i2t", "t2i"})
                    emit_row(gen, kind,
                             root / kind / ("gen" + std::to_string(gen)) /
                                 ("eval_k" + std::to_string(b) + "_" + tag + ".json"));

    // pair-precision table: merged list vs each single similarity source
    fs::path feat = root / header.value("features", std::string());
    fs::path labf = root / header.value("labels", std::string());
    fs::path teacher_path = root / "gen0" / "teacher.ukdm";
    if (fs::exists(feat) && fs::exists(labf) && fs::exists(teacher_path)) {
        PairedDataset ds = load_features(feat.string());
        LabelSet labels = load_labels(labf.string());
        TwoPathwayModel teacher = load_model(teacher_path.string());
        SplitSpec split =
            make_split(ds.n(), header.value("query_size", 0), header.value("split_seed", uint64_t(0)));
        PairedDataset train_ds = subset_dataset(ds, split.retrieval_indices);
        LabelSet train_labels = subset_labels(labels, split.retrieval_indices);
        int k_img = header.value("distill_k_img", 10);
        int k_txt = header.value("distill_k_txt", 10);

        fs::path pp_path = out_csv.empty()
                               ? (root / "pair_precision.csv")
                               : fs::path(out_csv).replace_extension(".pair_precision.csv");
        std::ofstream pp(pp_path);
        pp << "source,precision_at_200\n";
        auto emit_prec = [&](const std::string& name, const RelevantPairSet& set) {
            std::snprintf(buf, sizeof(buf), "%s,%.6f\n", name.c_str(),
                          pair_precision(set, train_labels, 200));
            pp << buf;
        };
        DistillParams p;
        p.k_img = k_img;
        p.k_txt = k_txt;
        p.per_instance_k = k_img + k_txt;
        emit_prec("merged", build_relevant_pairs(teacher, train_ds, p));
        for (SimilarityKind kind :
             {SimilarityKind::raw_image, SimilarityKind::raw_text, SimilarityKind::teacher_image,
              SimilarityKind::teacher_text, SimilarityKind::teacher_combined})
            emit_prec(similarity_kind_name(kind),
                      build_pairs_single_kind(kind, &teacher, train_ds, k_img, std::nullopt));
        std::cout << "wrote " << pp_path.string() << "\n";
    }

    std::cout << "wrote " << (out_csv.empty() ? (root / "summary.csv").string() : out_csv) << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"unsupervised knowledge distillation for cross-modal hashing"};
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "generate a synthetic paired dataset");
    int s_pairs = 2000, s_classes = 8, s_di = 64, s_dt = 32;
    double s_noise = 0.35;
    uint64_t s_seed = 7;
    std::string s_out = "data";
    synth->add_option("--pairs", s_pairs, "number of image-text pairs");
    synth->add_option("--classes", s_classes, "number of latent classes");
    synth->add_option("--dim-image", s_di, "image feature dimension");
    synth->add_option("--dim-text", s_dt, "text feature dimension");
    synth->add_option("--noise", s_noise, "feature noise sigma");
    synth->add_option("--seed", s_seed, "generator seed");
    synth->add_option("--out", s_out, "output directory");

    // shared training options helper
    auto add_train_opts = [](CLI::App* cmd, TrainConfig& cfg) {
        cmd->add_option("--epochs", cfg.epochs);
        cmd->add_option("--lr", cfg.learning_rate);
        cmd->add_option("--wd", cfg.weight_decay);
        cmd->add_option("--batch", cfg.batch_size);
        cmd->add_option("--margin", cfg.margin);
        cmd->add_option("--seed", cfg.seed);
        cmd->add_option("--negatives", cfg.negative_samples);
    };

    // train-teacher
    auto* tt = app.add_subcommand("train-teacher", "train the unsupervised teacher");
    std::string tt_features, tt_out = "teacher.ukdm", tt_strategy = "hard", tt_pairs, tt_log;
    int tt_hidden = 128, tt_bits = 32;
    TrainConfig tt_cfg;
    tt_cfg.epochs = 30;
    tt->add_option("--features", tt_features)->required();
    tt->add_option("--out", tt_out);
    tt->add_option("--hidden", tt_hidden);
    tt->add_option("--bits", tt_bits);
    tt->add_option("--strategy", tt_strategy, "uniform|hard");
    tt->add_option("--pairs", tt_pairs, "optional pair CSV guiding positives");
    tt->add_option("--log", tt_log, "per-epoch loss CSV");
    add_train_opts(tt, tt_cfg);

    // distill
    auto* dst = app.add_subcommand("distill", "mine a relevant pair set from a model");
    std::string d_features, d_model, d_out = "pairs.csv";
    int d_kimg = 10, d_ktxt = 10;
    std::optional<int> d_budget, d_pik;
    dst->add_option("--features", d_features)->required();
    dst->add_option("--model", d_model)->required();
    dst->add_option("--k-img", d_kimg);
    dst->add_option("--k-txt", d_ktxt);
    dst->add_option("--budget", d_budget, "global pair budget");
    dst->add_option("--per-instance-k", d_pik, "pairs kept per instance");
    dst->add_option("--out", d_out);

    // train-student
    auto* ts = app.add_subcommand("train-student", "train a student against a pair set");
    std::string ts_features, ts_pairs, ts_kind = "us", ts_out = "student.ukdm", ts_log;
    int ts_hidden = 64, ts_bits = 16;
    TrainConfig ts_cfg;
    ts->add_option("--features", ts_features)->required();
    ts->add_option("--pairs", ts_pairs)->required();
    ts->add_option("--kind", ts_kind, "us|ss");
    ts->add_option("--out", ts_out);
    ts->add_option("--hidden", ts_hidden);
    ts->add_option("--bits", ts_bits);
    ts->add_option("--log", ts_log);
    add_train_opts(ts, ts_cfg);

    // eval
    auto* ev = app.add_subcommand("eval", "evaluate a checkpoint on a split");
    std::string e_model, e_features, e_labels, e_dir = "i2t", e_klist = "50";
    std::string e_json = "eval.json", e_curve = "curve.csv";
    int e_query = 400;
    uint64_t e_seed = 1;
    ev->add_option("--model", e_model)->required();
    ev->add_option("--features", e_features)->required();
    ev->add_option("--labels", e_labels)->required();
    ev->add_option("--query-size", e_query);
    ev->add_option("--split-seed", e_seed);
    ev->add_option("--direction", e_dir, "i2t|t2i");
    ev->add_option("--k-list", e_klist, "comma-separated P@K cutoffs");
    ev->add_option("--out", e_json);
    ev->add_option("--curve", e_curve);

    // pipeline
    auto* pl = app.add_subcommand("pipeline", "run the full experiment from a JSON config");
    std::string p_config, p_out;
    pl->add_option("--config", p_config)->required();
    pl->add_option("--out", p_out, "override output_dir");

    // report
    auto* rp = app.add_subcommand("report", "summarize an experiment directory");
    std::string r_dir, r_out;
    rp->add_option("--dir", r_dir)->required();
    rp->add_option("--out", r_out, "summary CSV path");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    if (synth->parsed())
        return cmd_synth(s_pairs, s_classes, s_di, s_dt, s_noise, s_seed, s_out);
    if (tt->parsed()) {
        TrainConfig cfg = tt_cfg;
        return cmd_train_teacher(tt_features, tt_out, tt_hidden, tt_bits, cfg,
                                 parse_strategy(tt_strategy), tt_pairs, tt_log);
    }
    if (dst->parsed())
        return cmd_distill(d_features, d_model, d_kimg, d_ktxt, d_budget, d_pik, d_out);
    if (ts->parsed()) {
        StudentKind kind = parse_kind(ts_kind);
        TrainConfig cfg = ts_cfg;
        if (ts->count("--epochs") == 0) cfg.epochs = kind == StudentKind::supervised ? 40 : 80;
        if (kind == StudentKind::supervised && ts->count("--margin") == 0) cfg.margin = 1.5;
        return cmd_train_student(ts_features, ts_pairs, kind, ts_out, ts_hidden, ts_bits, cfg,
                                 ts_log);
    }
    if (ev->parsed())
        return cmd_eval(e_model, e_features, e_labels, e_query, e_seed, e_dir, e_klist, e_json,
                        e_curve);
    if (pl->parsed()) return cmd_pipeline(p_config, p_out);
    if (rp->parsed()) return cmd_report(r_dir, r_out);
    return kExitValidation;
}
