#include "erprompt/golden.hpp"

#include <fstream>
#include <ostream>
#include <sstream>

#include "erprompt/errors.hpp"
#include "erprompt/prompt.hpp"

namespace erprompt {

namespace {

EntityProfile make_profile(std::string id, std::string source,
                           std::optional<std::string> title,
                           std::optional<std::string> manufacturer,
                           std::optional<std::string> description) {
    EntityProfile profile;
    profile.id = std::move(id);
    profile.source = std::move(source);
    profile.attributes = {{"title", std::move(title)},
                          {"manufacturer", std::move(manufacturer)},
                          {"description", std::move(description)}};
    return canonicalize(profile);
}

std::string read_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

void print_diff(std::ostream& out, const std::string& name, const std::string& expected,
                const std::string& actual) {
    out << "golden fixture drift in " << name << ":\n";
    std::istringstream expected_in(expected);
    std::istringstream actual_in(actual);
    std::string expected_line;
    std::string actual_line;
    std::size_t line = 0;
    while (true) {
        const bool more_expected = static_cast<bool>(std::getline(expected_in, expected_line));
        const bool more_actual = static_cast<bool>(std::getline(actual_in, actual_line));
        ++line;
        if (!more_expected && !more_actual) break;
        const std::string& lhs = more_expected ? expected_line : std::string("<eof>");
        const std::string& rhs = more_actual ? actual_line : std::string("<eof>");
        if (lhs != rhs) {
            out << "  line " << line << ":\n";
            out << "  - " << rhs << "\n";
            out << "  + " << lhs << "\n";
        }
        if (!more_expected || !more_actual) break;
    }
}

} // namespace

CandidatePair golden_fixture_pair() {
    CandidatePair pair;
    pair.left = make_profile(
        "amazon-1", "amazon", "Apple final cut studio 2 (mac)", "Apple",
        "final cut studio 2 delivers an integrated post-production solution that lets "
        "you move effortlessly");
    pair.right = make_profile(
        "google-1", "google",
        "Apple final cut studio 2 production suite for mac av production software",
        std::nullopt,
        "final cut studio 2 production software suite for mac - final cut pro 6 motion 3 "
        "soundtrack pro 2 color compressor 3 dvd studio pro 4");
    pair.label = true;
    return pair;
}

DemonstrationSet golden_fixture_demonstrations() {
    DemonstrationSet demos;
    demos.seed = 0;

    CandidatePair first;
    first.left = make_profile("amazon-2", "amazon",
                              "Logitech mx master 3s wireless mouse (graphite)", "Logitech",
                              "8k dpi darkfield sensor with quiet clicks and usb-c charging");
    first.right = make_profile("google-2", "google",
                               "Logitech mx master 3s graphite wireless mouse", std::nullopt,
                               "wireless performance mouse - 8000 dpi sensor quiet clicks");
    first.label = true;
    demos.demos.push_back(std::move(first));

    CandidatePair second;
    second.left = make_profile("amazon-3", "amazon",
                               "Adobe photoshop elements 2024 (pc/mac)", "Adobe",
                               "photo editing software with guided edits and ai tools");
    second.right = make_profile("google-3", "google",
                                "Adobe photoshop elements 2024 for windows and mac",
                                "Adobe", std::nullopt);
    second.label = true;
    demos.demos.push_back(std::move(second));

    CandidatePair third;
    third.left = make_profile("amazon-4", "amazon",
                              "Western digital 2tb elements portable hdd", "Western Digital",
                              "usb 3.0 portable external hard drive 2tb capacity");
    third.right = make_profile("google-4", "google",
                               "Western digital 4tb elements portable hdd", std::nullopt,
                               "usb 3.0 portable external hard drive 4tb capacity");
    third.label = false;
    demos.demos.push_back(std::move(third));
    return demos;
}

std::vector<std::pair<std::string, std::string>> golden_fixture_files() {
    const CandidatePair pair = golden_fixture_pair();
    std::vector<std::pair<std::string, std::string>> files;
    files.emplace_back("persona.txt", persona_text());
    for (auto variant : all_pattern_variants()) {
        PromptPattern pattern;
        pattern.variant = variant;
        if (variant == PatternVariant::SingleAttr) pattern.primary_attribute = "title";
        if (variant == PatternVariant::FewShot) {
            pattern.demonstrations = golden_fixture_demonstrations();
        }
        files.emplace_back(pattern_id(variant) + ".user.txt", render(pattern, pair).user);
    }
    return files;
}

int freeze_prompts(const std::filesystem::path& dir, bool update,
                   std::ostream& diagnostics) {
    std::filesystem::create_directories(dir);
    int drift = 0;
    for (const auto& [name, content] : golden_fixture_files()) {
        const auto path = dir / name;
        if (update || !std::filesystem::exists(path)) {
            std::ofstream out(path, std::ios::binary | std::ios::trunc);
            if (!out) throw IngestError("cannot write golden fixture: " + path.string());
            out << content;
            diagnostics << (update ? "updated " : "created ") << path.string() << "\n";
            continue;
        }
        const std::string existing = read_file(path);
        if (existing != content) {
            print_diff(diagnostics, path.string(), content, existing);
            drift = 1;
        }
    }
    if (drift == 0) diagnostics << "golden fixtures match\n";
    return drift;
}

} // namespace erprompt
