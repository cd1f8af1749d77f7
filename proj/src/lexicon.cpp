#include "riskpipe/lexicon.hpp"

#include <fstream>
#include <set>

#include <nlohmann/json.hpp>

#include "riskpipe/errors.hpp"

namespace riskpipe {

using nlohmann::json;

MarkerLexicon MarkerLexicon::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValidationError("cannot open lexicon file: " + path.string());
    json doc;
    try {
        doc = json::parse(in);
    } catch (const json::exception& e) {
        throw ValidationError("lexicon file " + path.string() + ": " + e.what());
    }

    MarkerLexicon lex;
    for (const auto& m : doc.value("text_markers", json::array()))
        lex.text_markers.push_back({m.at("zh").get<std::string>(), m.at("en").get<std::string>()});
    for (const auto& f : doc.value("text_fillers", json::array()))
        lex.text_fillers.push_back(f.get<std::string>());
    for (const auto& a : doc.value("acoustic_markers", json::array()))
        lex.acoustic_markers.push_back(a.get<std::string>());
    for (const auto& a : doc.value("acoustic_fillers", json::array()))
        lex.acoustic_fillers.push_back(a.get<std::string>());
    lex.validate();
    return lex;
}

MarkerLexicon MarkerLexicon::builtin_default() {
    MarkerLexicon lex;
    lex.text_markers = {
        {"哭", "cry"},                  // 哭
        {"难过", "sad"},            // 难过
        {"绝望", "hopeless"},       // 绝望
        {"孤独", "lonely"},         // 孤独
        {"害怕", "afraid"},         // 害怕
        {"失眠", "sleepless"},      // 失眠
        {"崩溃", "overwhelmed"},    // 崩溃
        {"疲惫", "exhausted"},      // 疲惫
    };
    lex.text_fillers = {
        "今天",          // 今天
        "学校",          // 学校
        "朋友",          // 朋友
        "老师",          // 老师
        "吃饭",          // 吃饭
        "回家",          // 回家
        "看书",          // 看书
        "音乐",          // 音乐
    };
    lex.acoustic_markers = {"tremor", "breathy", "long_pause", "monotone"};
    lex.acoustic_fillers = {"steady", "clear", "rising", "falling", "neutral_tone", "brisk"};
    lex.validate();
    return lex;
}

std::vector<std::string> MarkerLexicon::marker_surfaces(const std::string& language) const {
    std::vector<std::string> out;
    out.reserve(text_markers.size());
    for (const auto& m : text_markers) {
        if (language == "zh")
            out.push_back(m.zh);
        else if (language == "en")
            out.push_back(m.en);
        else
            throw ValidationError("unknown feature language: " + language);
    }
    return out;
}

std::vector<std::string> MarkerLexicon::acoustic_vocabulary() const {
    std::vector<std::string> out = acoustic_markers;
    out.insert(out.end(), acoustic_fillers.begin(), acoustic_fillers.end());
    return out;
}

void MarkerLexicon::validate() const {
    if (text_markers.empty()) throw ValidationError("lexicon has no text markers");

    std::set<std::string> seen;
    for (const auto& m : text_markers) {
        if (m.zh.empty() || m.en.empty())
            throw ValidationError("lexicon marker surfaces must be non-empty");
        if (!seen.insert(m.zh).second)
            throw ValidationError("duplicate zh marker surface: " + m.zh);
        if (!seen.insert(m.en).second)
            throw ValidationError("duplicate en marker surface: " + m.en);
    }

    // Count preservation of the zh->en replacement needs surfaces that do
    // not contain one another and en forms free of zh surfaces.
    auto contains = [](const std::string& hay, const std::string& needle) {
        return hay.find(needle) != std::string::npos;
    };
    for (const auto& a : text_markers) {
        for (const auto& b : text_markers) {
            if (&a == &b) continue;
            if (contains(a.zh, b.zh))
                throw ValidationError("marker surface \"" + b.zh + "\" is contained in \"" +
                                      a.zh + "\"");
            if (contains(a.en, b.zh))
                throw ValidationError("en surface \"" + a.en + "\" contains zh surface \"" +
                                      b.zh + "\"");
        }
        for (const auto& f : text_fillers) {
            if (contains(f, a.zh) || contains(a.zh, f))
                throw ValidationError("filler \"" + f + "\" overlaps marker \"" + a.zh + "\"");
        }
    }

    std::set<std::string> acoustic_seen;
    for (const auto& t : acoustic_vocabulary()) {
        if (t.empty()) throw ValidationError("acoustic tokens must be non-empty");
        if (!acoustic_seen.insert(t).second)
            throw ValidationError("duplicate acoustic token: " + t);
    }
}

}  // namespace riskpipe
