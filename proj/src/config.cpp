#include "riskpipe/config.hpp"

#include <fstream>
#include <sstream>
#include <vector>

#include "riskpipe/cache.hpp"
#include "riskpipe/errors.hpp"
#include "riskpipe/hashing.hpp"

namespace riskpipe {

namespace fs = std::filesystem;

namespace {

std::string trim(const std::string& s) {
    const char* ws = " \t\r";
    const std::size_t begin = s.find_first_not_of(ws);
    if (begin == std::string::npos) return "";
    const std::size_t end = s.find_last_not_of(ws);
    return s.substr(begin, end - begin + 1);
}

struct RawConfig {
    // section -> key -> value; global keys live under "".
    std::map<std::string, std::map<std::string, std::string>> sections;
};

RawConfig parse_raw(const std::string& text) {
    RawConfig raw;
    std::istringstream in(text);
    std::string line;
    std::string section;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#' || t[0] == ';') continue;
        if (t.front() == '[') {
            if (t.back() != ']')
                throw ValidationError("config line " + std::to_string(line_no) +
                                      ": malformed section header");
            section = trim(t.substr(1, t.size() - 2));
            if (section.empty())
                throw ValidationError("config line " + std::to_string(line_no) +
                                      ": empty section name");
            raw.sections[section];
            continue;
        }
        const std::size_t eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("config line " + std::to_string(line_no) +
                                  ": expected key = value");
        const std::string key = trim(t.substr(0, eq));
        const std::string value = trim(t.substr(eq + 1));
        if (key.empty())
            throw ValidationError("config line " + std::to_string(line_no) + ": empty key");
        auto& sec = raw.sections[section];
        if (sec.count(key))
            throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key \"" +
                                  key + "\" in section [" + section + "]");
        sec[key] = value;
    }
    return raw;
}

class SectionReader {
public:
    SectionReader(const RawConfig& raw, std::string section) : section_(std::move(section)) {
        auto it = raw.sections.find(section_);
        if (it != raw.sections.end()) entries_ = it->second;
    }

    bool has(const std::string& key) const { return entries_.count(key) > 0; }

    std::string take(const std::string& key, const std::string& fallback) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return fallback;
        std::string v = it->second;
        entries_.erase(it);
        return v;
    }

    long take_long(const std::string& key, long fallback) {
        const std::string v = take(key, "");
        if (v.empty()) return fallback;
        try {
            std::size_t used = 0;
            const long parsed = std::stol(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return parsed;
        } catch (const std::exception&) {
            throw ValidationError("config [" + section_ + "] " + key +
                                  ": expected an integer, got \"" + v + "\"");
        }
    }

    double take_double(const std::string& key, double fallback) {
        const std::string v = take(key, "");
        if (v.empty()) return fallback;
        try {
            std::size_t used = 0;
            const double parsed = std::stod(v, &used);
            if (used != v.size()) throw std::invalid_argument(v);
            return parsed;
        } catch (const std::exception&) {
            throw ValidationError("config [" + section_ + "] " + key +
                                  ": expected a number, got \"" + v + "\"");
        }
    }

    std::uint64_t take_u64(const std::string& key, std::uint64_t fallback) {
        const std::string v = take(key, "");
        if (v.empty()) return fallback;
        try {
            return std::stoull(v);
        } catch (const std::exception&) {
            throw ValidationError("config [" + section_ + "] " + key +
                                  ": expected an unsigned integer, got \"" + v + "\"");
        }
    }

    std::map<std::string, std::string> take_provider_config() {
        std::map<std::string, std::string> out;
        for (auto it = entries_.begin(); it != entries_.end();) {
            if (it->first.rfind("provider.", 0) == 0) {
                out[it->first.substr(9)] = it->second;
                it = entries_.erase(it);
            } else {
                ++it;
            }
        }
        return out;
    }

    void finish() const {
        if (!entries_.empty())
            throw ValidationError("config: unknown key \"" + entries_.begin()->first +
                                  "\" in section [" + section_ + "]");
    }

private:
    std::string section_;
    std::map<std::string, std::string> entries_;
};

fs::path resolve(const fs::path& base_dir, const std::string& value) {
    const fs::path p(value);
    return p.is_absolute() ? p : base_dir / p;
}

std::vector<std::string> split_list(const std::string& value) {
    std::vector<std::string> out;
    std::istringstream in(value);
    std::string item;
    while (std::getline(in, item, ',')) {
        const std::string t = trim(item);
        if (!t.empty()) out.push_back(t);
    }
    return out;
}

void validate_hparams(const char* what, int epochs, double lr, int batch_size) {
    const std::string where(what);
    if (epochs < 1) throw ValidationError("config [" + where + "]: epochs must be >= 1");
    if (!(lr > 0.0))
        throw ValidationError("config [" + where + "]: learning_rate must be positive");
    if (batch_size < 1) throw ValidationError("config [" + where + "]: batch_size must be >= 1");
}

}  // namespace

ExperimentConfig parse_config_text(const std::string& text, const fs::path& base_dir) {
    const RawConfig raw = parse_raw(text);

    static const std::set<std::string> kKnownSections = {
        "",        "dataset",      "asr",    "extraction", "text_model",
        "speech_model", "fusion", "decision", "report",     "runtime"};
    for (const auto& [name, entries] : raw.sections)
        if (!kKnownSections.count(name))
            throw ValidationError("config: unknown section [" + name + "]");

    ExperimentConfig cfg;

    SectionReader global(raw, "");
    cfg.experiment_id = global.take("experiment_id", "");
    if (cfg.experiment_id.empty())
        throw ValidationError("config: experiment_id is required before the first section");
    require_path_safe_id(cfg.experiment_id, "experiment_id");
    global.finish();

    SectionReader runtime(raw, "runtime");
    cfg.runtime.seed = runtime.take_u64("seed", 0);
    cfg.runtime.cache_root = resolve(base_dir, runtime.take("cache_root", ".riskpipe-cache"));
    cfg.runtime.output_root = resolve(base_dir, runtime.take("output_root", "runs"));
    runtime.finish();

    SectionReader dataset(raw, "dataset");
    {
        const std::string manifest = dataset.take("manifest", "");
        if (manifest.empty()) throw ValidationError("config [dataset]: manifest is required");
        cfg.dataset.manifest = resolve(base_dir, manifest);
        const std::string ratios = dataset.take("split_ratios", "4,1,1");
        const auto parts = split_list(ratios);
        if (parts.size() != 3)
            throw ValidationError("config [dataset]: split_ratios must be three integers");
        for (int i = 0; i < 3; ++i) {
            const int r = std::stoi(parts[static_cast<std::size_t>(i)]);
            if (r <= 0) throw ValidationError("config [dataset]: split ratios must be positive");
            cfg.dataset.split_ratios[static_cast<std::size_t>(i)] = r;
        }
        cfg.dataset.split_seed =
            dataset.take_u64("split_seed", derive_seed(cfg.runtime.seed, "split"));
        dataset.finish();
    }

    SectionReader asr(raw, "asr");
    cfg.asr.provider_id = asr.take("provider", "file");
    require_path_safe_id(cfg.asr.provider_id, "asr provider");
    cfg.asr.concurrency = static_cast<int>(asr.take_long("concurrency", 4));
    cfg.asr.retry_attempts = static_cast<int>(asr.take_long("retry_attempts", 3));
    cfg.asr.retry_backoff_ms = static_cast<int>(asr.take_long("retry_backoff_ms", 250));
    cfg.asr.provider_config = asr.take_provider_config();
    if (cfg.asr.concurrency < 1)
        throw ValidationError("config [asr]: concurrency must be >= 1");
    asr.finish();

    SectionReader extraction(raw, "extraction");
    cfg.extraction.provider_id = extraction.take("provider", "mock");
    require_path_safe_id(cfg.extraction.provider_id, "extraction provider");
    cfg.extraction.prompt_version = extraction.take("prompt_version", "v1");
    require_path_safe_id(cfg.extraction.prompt_version, "prompt_version");
    cfg.extraction.templates_dir = resolve(base_dir, extraction.take("templates_dir", "templates"));
    {
        const auto langs = split_list(extraction.take("languages", "zh,en"));
        if (langs.empty())
            throw ValidationError("config [extraction]: languages must be non-empty");
        cfg.extraction.languages.clear();
        for (const auto& l : langs) {
            if (l != "zh" && l != "en")
                throw ValidationError("config [extraction]: unsupported language \"" + l + "\"");
            cfg.extraction.languages.insert(l);
        }
    }
    {
        const std::string lexicon = extraction.take("lexicon", "");
        if (!lexicon.empty()) cfg.extraction.lexicon = resolve(base_dir, lexicon);
    }
    cfg.extraction.concurrency = static_cast<int>(extraction.take_long("concurrency", 4));
    cfg.extraction.retry_attempts = static_cast<int>(extraction.take_long("retry_attempts", 3));
    cfg.extraction.retry_backoff_ms =
        static_cast<int>(extraction.take_long("retry_backoff_ms", 250));
    cfg.extraction.provider_config = extraction.take_provider_config();
    if (cfg.extraction.concurrency < 1)
        throw ValidationError("config [extraction]: concurrency must be >= 1");
    extraction.finish();

    SectionReader text_model(raw, "text_model");
    cfg.text_model.encoder_id = text_model.take("encoder", "mock-text-bag");
    cfg.text_model.feature_language = text_model.take("feature_language", "zh");
    if (cfg.text_model.feature_language != "zh" && cfg.text_model.feature_language != "en")
        throw ValidationError("config [text_model]: feature_language must be zh or en");
    if (!cfg.extraction.languages.count(cfg.text_model.feature_language))
        throw ValidationError("config [text_model]: feature_language " +
                              cfg.text_model.feature_language +
                              " is not among the extraction languages");
    cfg.text_model.epochs = static_cast<int>(text_model.take_long("epochs", 10));
    cfg.text_model.learning_rate = text_model.take_double("learning_rate", 5e-5);
    cfg.text_model.batch_size = static_cast<int>(text_model.take_long("batch_size", 16));
    validate_hparams("text_model", cfg.text_model.epochs, cfg.text_model.learning_rate,
                     cfg.text_model.batch_size);
    text_model.finish();

    SectionReader speech_model(raw, "speech_model");
    cfg.speech_model.encoder_id = speech_model.take("encoder", "mock-speech-bag");
    cfg.speech_model.feature_language = "";
    cfg.speech_model.epochs = static_cast<int>(speech_model.take_long("epochs", 10));
    cfg.speech_model.learning_rate = speech_model.take_double("learning_rate", 1e-5);
    cfg.speech_model.batch_size = static_cast<int>(speech_model.take_long("batch_size", 8));
    validate_hparams("speech_model", cfg.speech_model.epochs, cfg.speech_model.learning_rate,
                     cfg.speech_model.batch_size);
    speech_model.finish();

    SectionReader fusion(raw, "fusion");
    cfg.fusion.epochs = static_cast<int>(fusion.take_long("epochs", 10));
    cfg.fusion.learning_rate = fusion.take_double("learning_rate", 1e-3);
    cfg.fusion.batch_size = static_cast<int>(fusion.take_long("batch_size", 32));
    validate_hparams("fusion", cfg.fusion.epochs, cfg.fusion.learning_rate,
                     cfg.fusion.batch_size);
    fusion.finish();

    SectionReader decision(raw, "decision");
    cfg.policy = voting_policy_from_string(decision.take("policy", "majority_argmax"));
    decision.finish();

    SectionReader report(raw, "report");
    {
        const std::string precision = report.take("acc_precision", "integer");
        if (precision == "integer")
            cfg.acc_precision = AccPrecision::IntegerPercent;
        else if (precision == "two_decimal")
            cfg.acc_precision = AccPrecision::TwoDecimals;
        else
            throw ValidationError(
                "config [report]: acc_precision must be integer or two_decimal");
    }
    report.finish();

    return cfg;
}

ExperimentConfig load_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open config file: " + path.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_config_text(buf.str(), fs::absolute(path).parent_path());
}

std::string ExperimentConfig::canonical_string() const {
    std::ostringstream out;
    out << "experiment_id=" << experiment_id << "\n";
    out << "dataset.manifest=" << dataset.manifest.string() << "\n";
    out << "dataset.split_ratios=" << dataset.split_ratios[0] << "," << dataset.split_ratios[1]
        << "," << dataset.split_ratios[2] << "\n";
    out << "dataset.split_seed=" << dataset.split_seed << "\n";
    out << "asr.provider=" << asr.provider_id << "\n";
    out << "asr.concurrency=" << asr.concurrency << "\n";
    out << "asr.retry_attempts=" << asr.retry_attempts << "\n";
    out << "asr.retry_backoff_ms=" << asr.retry_backoff_ms << "\n";
    for (const auto& [k, v] : asr.provider_config) out << "asr.provider." << k << "=" << v << "\n";
    out << "extraction.provider=" << extraction.provider_id << "\n";
    out << "extraction.prompt_version=" << extraction.prompt_version << "\n";
    out << "extraction.templates_dir=" << extraction.templates_dir.string() << "\n";
    out << "extraction.languages=";
    bool first = true;
    for (const auto& l : extraction.languages) {
        if (!first) out << ",";
        out << l;
        first = false;
    }
    out << "\n";
    out << "extraction.lexicon=" << extraction.lexicon.string() << "\n";
    out << "extraction.concurrency=" << extraction.concurrency << "\n";
    out << "extraction.retry_attempts=" << extraction.retry_attempts << "\n";
    out << "extraction.retry_backoff_ms=" << extraction.retry_backoff_ms << "\n";
    for (const auto& [k, v] : extraction.provider_config)
        out << "extraction.provider." << k << "=" << v << "\n";
    out << "text_model.encoder=" << text_model.encoder_id << "\n";
    out << "text_model.feature_language=" << text_model.feature_language << "\n";
    out << "text_model.epochs=" << text_model.epochs << "\n";
    out << "text_model.learning_rate=" << text_model.learning_rate << "\n";
    out << "text_model.batch_size=" << text_model.batch_size << "\n";
    out << "speech_model.encoder=" << speech_model.encoder_id << "\n";
    out << "speech_model.epochs=" << speech_model.epochs << "\n";
    out << "speech_model.learning_rate=" << speech_model.learning_rate << "\n";
    out << "speech_model.batch_size=" << speech_model.batch_size << "\n";
    out << "fusion.epochs=" << fusion.epochs << "\n";
    out << "fusion.learning_rate=" << fusion.learning_rate << "\n";
    out << "fusion.batch_size=" << fusion.batch_size << "\n";
    out << "decision.policy=" << to_string(policy) << "\n";
    out << "report.acc_precision="
        << (acc_precision == AccPrecision::IntegerPercent ? "integer" : "two_decimal") << "\n";
    out << "runtime.seed=" << runtime.seed << "\n";
    out << "runtime.cache_root=" << runtime.cache_root.string() << "\n";
    out << "runtime.output_root=" << runtime.output_root.string() << "\n";
    return out.str();
}

std::uint64_t ExperimentConfig::config_hash() const {
    return fnv1a64(canonical_string());
}

}  // namespace riskpipe
