#include "erprompt/ingest.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

#include "erprompt/errors.hpp"

namespace erprompt {

namespace {

using ordered_json = nlohmann::ordered_json;

bool valid_utf8(std::string_view bytes) {
    std::size_t i = 0;
    while (i < bytes.size()) {
        unsigned char c = static_cast<unsigned char>(bytes[i]);
        std::size_t extra;
        if (c < 0x80) {
            i += 1;
            continue;
        } else if ((c & 0xe0) == 0xc0 && c >= 0xc2) {
            extra = 1;
        } else if ((c & 0xf0) == 0xe0) {
            extra = 2;
        } else if ((c & 0xf8) == 0xf0 && c <= 0xf4) {
            extra = 3;
        } else {
            return false;
        }
        if (i + extra >= bytes.size()) return false;
        for (std::size_t k = 1; k <= extra; ++k) {
            if ((static_cast<unsigned char>(bytes[i + k]) & 0xc0) != 0x80) return false;
        }
        i += extra + 1;
    }
    return true;
}

std::string read_text_file(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IngestError("cannot open file: " + file.string());
    std::ostringstream buf;
    buf << in.rdbuf();
    std::string content = buf.str();
    if (content.rfind("\xef\xbb\xbf", 0) == 0) content.erase(0, 3); // UTF-8 BOM
    if (!valid_utf8(content)) {
        throw FormatError("file is not valid UTF-8: " + file.string());
    }
    return content;
}

// Minimal RFC-4180 reader: quoted fields may contain commas, newlines and
// doubled quotes. Accepts LF and CRLF row endings.
std::vector<std::vector<std::string>> parse_csv(const std::string& content,
                                                const std::filesystem::path& file) {
    std::vector<std::vector<std::string>> rows;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_was_quoted = false;
    std::size_t line = 1;

    auto end_field = [&]() {
        row.push_back(std::move(field));
        field.clear();
        field_was_quoted = false;
    };
    auto end_row = [&]() {
        end_field();
        rows.push_back(std::move(row));
        row.clear();
    };

    for (std::size_t i = 0; i < content.size(); ++i) {
        char c = content[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < content.size() && content[i + 1] == '"') {
                    field.push_back('"');
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty() || field_was_quoted) {
                throw FormatError(file.string() + ": stray quote in line " +
                                  std::to_string(line));
            }
            in_quotes = true;
            field_was_quoted = true;
            break;
        case ',':
            end_field();
            break;
        case '\r':
            if (i + 1 < content.size() && content[i + 1] == '\n') break;
            field.push_back(c);
            break;
        case '\n':
            end_row();
            ++line;
            break;
        default:
            field.push_back(c);
        }
    }
    if (in_quotes) {
        throw FormatError(file.string() + ": unterminated quoted field");
    }
    if (!field.empty() || field_was_quoted || !row.empty()) end_row();
    return rows;
}

void check_header(const std::vector<std::string>& header,
                  const std::vector<std::string>& expected,
                  const std::filesystem::path& file) {
    std::unordered_set<std::string> seen;
    for (const auto& column : header) {
        if (!seen.insert(column).second) {
            throw FormatError(file.string() + ": duplicate header column '" +
                              column + "'");
        }
    }
    if (header != expected) {
        std::string want;
        for (const auto& column : expected) {
            if (!want.empty()) want += ",";
            want += column;
        }
        throw FormatError(file.string() + ": expected header '" + want + "'");
    }
}

EntityCollection load_record_csv(const std::filesystem::path& file,
                                 const std::string& collection_name) {
    auto rows = parse_csv(read_text_file(file), file);
    if (rows.empty()) throw FormatError(file.string() + ": empty file");
    check_header(rows.front(), {"id", "title", "description", "manufacturer", "price"}, file);

    EntityCollection collection;
    collection.name = collection_name;
    collection.schema.assign(rows.front().begin() + 1, rows.front().end());

    std::unordered_set<std::string> ids;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const auto& row = rows[r];
        if (row.size() != rows.front().size()) {
            throw FormatError(file.string() + ": row " + std::to_string(r + 1) +
                              " has " + std::to_string(row.size()) + " fields, expected " +
                              std::to_string(rows.front().size()));
        }
        if (row[0].empty()) {
            throw FormatError(file.string() + ": row " + std::to_string(r + 1) +
                              " has empty id");
        }
        if (!ids.insert(row[0]).second) {
            throw FormatError(file.string() + ": duplicate id '" + row[0] + "'");
        }
        EntityProfile profile;
        profile.id = row[0];
        profile.source = collection_name;
        for (std::size_t c = 1; c < row.size(); ++c) {
            std::optional<std::string> value;
            if (!row[c].empty()) value = row[c];
            profile.attributes.emplace_back(collection.schema[c - 1], std::move(value));
        }
        collection.profiles.push_back(canonicalize(profile));
    }
    return collection;
}

std::string join_ids(const std::vector<std::string>& ids) {
    constexpr std::size_t kMaxListed = 20;
    std::string out;
    for (std::size_t i = 0; i < ids.size() && i < kMaxListed; ++i) {
        if (!out.empty()) out += ", ";
        out += ids[i];
    }
    if (ids.size() > kMaxListed) {
        out += " (and " + std::to_string(ids.size() - kMaxListed) + " more)";
    }
    return out;
}

std::string csv_escape(const std::string& field) {
    if (field.find_first_of(",\"\r\n") == std::string::npos) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out.push_back('"');
    return out;
}

std::optional<std::string> json_attribute_value(const ordered_json& value,
                                                const std::filesystem::path& file,
                                                std::size_t line) {
    if (value.is_null()) return std::nullopt;
    if (value.is_string()) return value.get<std::string>();
    if (value.is_number() || value.is_boolean()) return value.dump();
    throw FormatError(file.string() + ": line " + std::to_string(line) +
                      " has a non-scalar attribute value");
}

EntityProfile profile_from_json(const ordered_json& object, std::string id,
                                const std::filesystem::path& file, std::size_t line) {
    if (!object.is_object()) {
        throw FormatError(file.string() + ": line " + std::to_string(line) +
                          " record side is not an object");
    }
    EntityProfile profile;
    profile.id = std::move(id);
    profile.source = "wdc";
    for (const auto& [key, value] : object.items()) {
        profile.attributes.emplace_back(key, json_attribute_value(value, file, line));
    }
    return canonicalize(profile);
}

} // namespace

std::tuple<EntityCollection, EntityCollection, LabeledPairSet>
load_amazon_google(const std::filesystem::path& dir) {
    auto amazon = load_record_csv(dir / kAmazonRecordsFile, "amazon");
    auto google = load_record_csv(dir / kGoogleRecordsFile, "google");

    std::unordered_map<std::string, std::size_t> amazon_index;
    for (std::size_t i = 0; i < amazon.profiles.size(); ++i) amazon_index[amazon.profiles[i].id] = i;
    std::unordered_map<std::string, std::size_t> google_index;
    for (std::size_t i = 0; i < google.profiles.size(); ++i) google_index[google.profiles[i].id] = i;

    const auto mapping_path = dir / kPerfectMappingFile;
    auto mapping_rows = parse_csv(read_text_file(mapping_path), mapping_path);
    if (mapping_rows.empty()) throw FormatError(mapping_path.string() + ": empty file");
    check_header(mapping_rows.front(), {"idAmazon", "idGoogle"}, mapping_path);

    std::vector<std::string> unknown_ids;
    std::unordered_set<std::string> mapping_keys;
    for (std::size_t r = 1; r < mapping_rows.size(); ++r) {
        const auto& row = mapping_rows[r];
        if (row.size() != 2) {
            throw FormatError(mapping_path.string() + ": row " + std::to_string(r + 1) +
                              " has " + std::to_string(row.size()) + " fields, expected 2");
        }
        if (!amazon_index.count(row[0])) unknown_ids.push_back(row[0]);
        if (!google_index.count(row[1])) unknown_ids.push_back(row[1]);
        mapping_keys.insert(row[0] + "\x1f" + row[1]);
    }
    if (!unknown_ids.empty()) {
        throw IntegrityError(mapping_path.string() + ": ids not present in the record files: " +
                             join_ids(unknown_ids));
    }

    const auto labeled_path = dir / kLabeledPairsFile;
    auto labeled_rows = parse_csv(read_text_file(labeled_path), labeled_path);
    if (labeled_rows.empty()) throw FormatError(labeled_path.string() + ": empty file");
    check_header(labeled_rows.front(), {"idAmazon", "idGoogle", "label"}, labeled_path);

    LabeledPairSet set;
    set.name = "amazon-google";
    std::vector<std::string> inconsistent;
    for (std::size_t r = 1; r < labeled_rows.size(); ++r) {
        const auto& row = labeled_rows[r];
        if (row.size() != 3) {
            throw FormatError(labeled_path.string() + ": row " + std::to_string(r + 1) +
                              " has " + std::to_string(row.size()) + " fields, expected 3");
        }
        if (row[2] != "0" && row[2] != "1") {
            throw FormatError(labeled_path.string() + ": row " + std::to_string(r + 1) +
                              " has label '" + row[2] + "', expected 0 or 1");
        }
        auto amazon_it = amazon_index.find(row[0]);
        auto google_it = google_index.find(row[1]);
        if (amazon_it == amazon_index.end()) unknown_ids.push_back(row[0]);
        if (google_it == google_index.end()) unknown_ids.push_back(row[1]);
        if (!unknown_ids.empty()) continue;

        const bool label = row[2] == "1";
        const bool mapped = mapping_keys.count(row[0] + "\x1f" + row[1]) > 0;
        if (label != mapped) inconsistent.push_back(row[0] + "/" + row[1]);

        CandidatePair pair;
        pair.left = amazon.profiles[amazon_it->second];
        pair.right = google.profiles[google_it->second];
        pair.label = label;
        set.pairs.push_back(std::move(pair));
        ++(label ? set.positives : set.negatives);
    }
    if (!unknown_ids.empty()) {
        throw IntegrityError(labeled_path.string() + ": ids not present in the record files: " +
                             join_ids(unknown_ids));
    }
    if (!inconsistent.empty()) {
        throw IntegrityError(labeled_path.string() +
                             ": labels disagree with " + std::string(kPerfectMappingFile) +
                             " for pairs: " + join_ids(inconsistent));
    }
    return {std::move(amazon), std::move(google), std::move(set)};
}

LabeledPairSet load_wdc(const std::filesystem::path& file) {
    std::string content = read_text_file(file);
    LabeledPairSet set;
    set.name = "wdc";

    std::size_t line_no = 0;
    std::size_t start = 0;
    while (start < content.size()) {
        std::size_t end = content.find('\n', start);
        if (end == std::string::npos) end = content.size();
        std::string_view line(content.data() + start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        start = end + 1;
        ++line_no;
        if (line.empty()) continue;

        ordered_json record;
        try {
            record = ordered_json::parse(line);
        } catch (const nlohmann::json::exception&) {
            throw FormatError(file.string() + ": malformed record on line " +
                              std::to_string(line_no));
        }
        if (!record.is_object() || !record.contains("left") || !record.contains("right") ||
            !record.contains("label")) {
            throw FormatError(file.string() + ": line " + std::to_string(line_no) +
                              " must carry keys left, right, label");
        }
        const auto& label = record["label"];
        if (!label.is_number_integer() ||
            (label.get<long long>() != 0 && label.get<long long>() != 1)) {
            throw FormatError(file.string() + ": line " + std::to_string(line_no) +
                              " has label " + label.dump() + ", expected 0 or 1");
        }
        CandidatePair pair;
        pair.left = profile_from_json(record["left"], std::to_string(line_no) + "L", file, line_no);
        pair.right = profile_from_json(record["right"], std::to_string(line_no) + "R", file, line_no);
        pair.label = label.get<long long>() == 1;
        set.pairs.push_back(std::move(pair));
        ++(*set.pairs.back().label ? set.positives : set.negatives);
    }
    return set;
}

void write_wdc(const LabeledPairSet& set, const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IngestError("cannot write file: " + file.string());
    auto side_json = [](const EntityProfile& profile) {
        ordered_json object = ordered_json::object();
        for (const auto& [name, value] : profile.attributes) {
            if (value.has_value()) object[name] = *value;
            else object[name] = nullptr;
        }
        return object;
    };
    for (const auto& pair : set.pairs) {
        ordered_json record = ordered_json::object();
        record["left"] = side_json(pair.left);
        record["right"] = side_json(pair.right);
        record["label"] = pair.label.value_or(false) ? 1 : 0;
        out << record.dump() << '\n';
    }
}

void write_collection_csv(const EntityCollection& collection,
                          const std::filesystem::path& file) {
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IngestError("cannot write file: " + file.string());
    out << "id";
    for (const auto& column : collection.schema) out << ',' << csv_escape(column);
    out << '\n';
    for (const auto& profile : collection.profiles) {
        out << csv_escape(profile.id);
        for (const auto& [name, value] : profile.attributes) {
            out << ',' << csv_escape(value.value_or(""));
        }
        out << '\n';
    }
}

DemonstrationSet sample_demonstrations(const LabeledPairSet& train, std::uint64_t seed) {
    std::vector<std::size_t> positives;
    std::vector<std::size_t> negatives;
    for (std::size_t i = 0; i < train.pairs.size(); ++i) {
        if (!train.pairs[i].label.has_value()) continue;
        (*train.pairs[i].label ? positives : negatives).push_back(i);
    }
    if (positives.size() < 2 || negatives.empty()) {
        throw ConfigError("few-shot demonstrations need at least 2 duplicate and 1 "
                          "non-duplicate training pairs; got " +
                          std::to_string(positives.size()) + " duplicates and " +
                          std::to_string(negatives.size()) + " non-duplicates");
    }
    // mt19937_64 output is standardized, so modulo draws keep the selection
    // reproducible across platforms.
    std::mt19937_64 gen(seed);
    auto draw_from = [&gen](std::vector<std::size_t>& indices) {
        std::size_t at = static_cast<std::size_t>(gen() % indices.size());
        std::swap(indices[at], indices.back());
        std::size_t picked = indices.back();
        indices.pop_back();
        return picked;
    };
    DemonstrationSet demos;
    demos.seed = seed;
    demos.demos.push_back(train.pairs[draw_from(positives)]);
    demos.demos.push_back(train.pairs[draw_from(positives)]);
    demos.demos.push_back(train.pairs[draw_from(negatives)]);
    return demos;
}

} // namespace erprompt
