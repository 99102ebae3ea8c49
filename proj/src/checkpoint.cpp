#include "swu/checkpoint.hpp"

#include "swu/tensor_io.hpp"

#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

namespace swu {

using nlohmann::json;
namespace fs = std::filesystem;

static void write_text(const std::string& path, const std::string& text) {
    std::ofstream os(path, std::ios::trunc);
    if (!os) throw IoError("cannot open for writing: " + path);
    os << text;
    if (!os) throw IoError("write failed: " + path);
}

static std::string read_text(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open: " + path);
    return std::string((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
}

void save_checkpoint(const std::string& dir, const ParamStore& params, const RunConfig& cfg,
                     const TrainHistory& history) {
    fs::create_directories(fs::path(dir) / "params");
    json manifest;
    for (const auto& [name, t] : params) {
        const std::string file = "params/" + name + ".swut";
        TensorData td;
        td.dtype = 0;
        td.shape = t.shape;
        td.f32.resize(t.v.size());
        for (size_t i = 0; i < t.v.size(); ++i) td.f32[i] = static_cast<float>(t.v[i]);
        write_tensor((fs::path(dir) / file).string(), td);
        manifest[name] = {{"file", file}, {"shape", t.shape}};
    }
    json j;
    j["format_version"] = 1;
    j["config"] = json::parse(run_config_to_json(cfg));
    j["best_epoch"] = history.best_epoch;
    j["best_val_score"] = history.best_val_score;
    j["initial_val_score"] = history.initial_val_score;
    j["params"] = manifest;
    write_text((fs::path(dir) / "checkpoint.json").string(), j.dump(2) + "\n");
    write_history_csv((fs::path(dir) / "history.csv").string(), history);
}

Checkpoint load_checkpoint(const std::string& dir) {
    json j;
    try {
        j = json::parse(read_text((fs::path(dir) / "checkpoint.json").string()));
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed checkpoint.json: ") + e.what());
    }
    if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
        throw IoError("unsupported checkpoint format in " + dir);
    Checkpoint ck;
    ck.config = parse_run_config(j.at("config").dump());
    ck.best_epoch = j.value("best_epoch", 0);
    ck.best_val_score = j.value("best_val_score", 0.0);
    ck.initial_val_score = j.value("initial_val_score", 0.0);
    for (const auto& [name, entry] : j.at("params").items()) {
        const std::string file = entry.at("file").get<std::string>();
        TensorData td = read_tensor((fs::path(dir) / file).string());
        if (td.dtype != 0) throw IoError("parameter tensor must be float32: " + file);
        Tensor t(td.shape, 0.0);
        for (size_t i = 0; i < td.f32.size(); ++i) t.v[i] = static_cast<double>(td.f32[i]);
        ck.params[name] = std::move(t);
    }
    return ck;
}

void write_history_csv(const std::string& path, const TrainHistory& history) {
    static const char* kTerms[] = {"nll", "ec", "pair", "tail", "trust", "anchor", "res"};
    std::string out = "epoch,lr,total";
    for (const char* t : kTerms) out += std::string(",") + t;
    out += ",val_score\n";
    char buf[64];
    auto num = [&buf](double v) {
        std::snprintf(buf, sizeof(buf), "%.10g", v);
        return std::string(buf);
    };
    // Row 0 records the pre-training validation score.
    out += "0,0,0,0,0,0,0,0,0,0," + num(history.initial_val_score) + "\n";
    for (const EpochRecord& r : history.epochs) {
        out += std::to_string(r.epoch) + "," + num(r.lr) + "," + num(r.total_loss);
        for (const char* t : kTerms) {
            auto it = r.terms.find(t);
            out += "," + num(it == r.terms.end() ? 0.0 : it->second);
        }
        out += "," + num(r.val_score) + "\n";
    }
    write_text(path, out);
}

static std::string case_dir_name(int64_t id) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "case_%08lld", static_cast<long long>(id));
    return std::string(buf);
}

void save_cases(const std::string& dir, const std::string& split,
                const std::vector<CaseData>& cases) {
    const fs::path root = fs::path(dir) / split;
    fs::create_directories(root);
    json ids = json::array();
    for (const CaseData& cs : cases) {
        const fs::path cdir = root / case_dir_name(cs.id);
        fs::create_directories(cdir);
        for (size_t k = 0; k < cs.taps.size(); ++k)
            write_tensor((cdir / ("tap" + std::to_string(k) + ".swut")).string(), cs.taps[k]);
        write_tensor((cdir / "logits.swut").string(), cs.logits);
        write_tensor((cdir / "labels.swut").string(), cs.labels);
        ids.push_back(cs.id);
    }
    json manifest;
    manifest["split"] = split;
    manifest["case_ids"] = ids;
    write_text((root / "manifest.json").string(), manifest.dump(2) + "\n");
}

std::vector<CaseData> load_cases(const std::string& dir, const std::string& split) {
    const fs::path root = fs::path(dir) / split;
    json manifest;
    try {
        manifest = json::parse(read_text((root / "manifest.json").string()));
    } catch (const json::exception& e) {
        throw IoError(std::string("malformed split manifest: ") + e.what());
    }
    std::vector<CaseData> out;
    for (const auto& id_entry : manifest.at("case_ids")) {
        const int64_t id = id_entry.get<int64_t>();
        const fs::path cdir = root / case_dir_name(id);
        CaseData cs;
        cs.id = id;
        for (size_t k = 0;; ++k) {
            const fs::path tap = cdir / ("tap" + std::to_string(k) + ".swut");
            if (!fs::exists(tap)) break;
            cs.taps.push_back(read_field(tap.string()));
        }
        if (cs.taps.empty()) throw IoError("case has no taps: " + cdir.string());
        cs.logits = read_field((cdir / "logits.swut").string());
        cs.labels = read_labels((cdir / "labels.swut").string());
        out.push_back(std::move(cs));
    }
    return out;
}

}  // namespace swu
