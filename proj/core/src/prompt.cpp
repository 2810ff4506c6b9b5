#include "phigrade/prompt.hpp"

#include <fstream>
#include <istream>
#include <sstream>

#include "phigrade/error.hpp"
#include "phigrade/text.hpp"

namespace phigrade {
namespace {

// The exact production wording is not published anywhere we can reuse; this
// wording keeps the four-part structure (role, task, rules, exemplars) and
// the JSON-only framing.
constexpr std::string_view kSystemText =
    "You are a clinical privacy extraction engine for online medical consultation "
    "records. You output JSON only: no prose, no explanations, no markdown. "
    "Entities are short Chinese spans copied verbatim from the consultation text.";

constexpr std::string_view kTaskText =
    "Task: extract every item of health data in the consultation as a triple "
    "(entity, category, level). \"entity\" is the span as written in the text. "
    "\"category\" must be drawn from the predefined category set in the grading rules "
    "below; use the ASCII slug exactly as listed. \"level\" is the integer sensitivity "
    "level (1-5) the rules assign to that category. List each distinct triple once. "
    "Return a JSON object of the form {\"triples\": [{\"entity\": \"...\", \"category\": "
    "\"...\", \"level\": 1}]}, with an empty list when nothing applies.";

constexpr std::string_view kSchemaSentence =
    " Your reply is validated against the attached JSON schema.";
constexpr std::string_view kFreeFormSentence =
    " No schema is attached; reply with that JSON object and nothing else.";

struct KeyPoint {
  std::vector<std::string_view> slugs;
  std::string_view text;
};

const std::vector<KeyPoint>& key_points() {
  static const std::vector<KeyPoint> points{
      {{"special disease"},
       "Affirmed special diseases (STD, infectious, psychiatric, malignant, genetic, "
       "anorectal, rare or incurable) are \"special disease\", level 5."},
      {{"disease-suspected", "disease-ruled out"},
       "Suspected or uncertain diseases are \"disease-suspected\" and explicitly "
       "ruled-out diseases are \"disease-ruled out\"; both are level 2, even when the "
       "disease would otherwise be special."},
      {{"sensitive test result"},
       "Positive high-risk HPV genotypes and positive HIV or hepatitis markers are "
       "\"sensitive test result\", level 5."},
      {{"date", "month", "year"},
       "A day-level date is \"date\" (level 3); a month-only or year-only mention is "
       "\"month\" or \"year\" (level 2)."},
      {{"patient name", "patient surname", "doctor name", "doctor surname"},
       "Full names are \"patient name\" / \"doctor name\" (level 4); surname-only "
       "references such as 张某 or 王医生 are \"patient surname\" / \"doctor surname\" "
       "(level 3)."},
      {{"test/exam name", "test/exam result"},
       "The name of a test is \"test/exam name\" (level 2); its outcome is "
       "\"test/exam result\" (level 3)."},
  };
  return points;
}

Triple exemplar_triple(const nlohmann::json& item, const Taxonomy& taxonomy,
                       const std::string& where) {
  if (!item.is_object()) throw ConfigError(where + ": triple must be an object");
  const auto entity = item.find("entity");
  if (entity == item.end() || !entity->is_string() ||
      text::trim(entity->get_ref<const std::string&>()).empty()) {
    throw ConfigError(where + ": triple needs a non-empty string entity");
  }
  const auto category = item.find("category");
  const TaxonomyEntry* entry = nullptr;
  if (category != item.end() && category->is_string()) {
    entry = taxonomy.find(category->get_ref<const std::string&>());
  }
  if (entry == nullptr) {
    throw ConfigError(where + ": category outside the taxonomy: " +
                      (category == item.end() ? std::string("<missing>") : category->dump()));
  }
  const auto level = item.find("level");
  std::optional<SensitivityLevel> checked;
  if (level != item.end() && level->is_number_integer()) {
    checked = SensitivityLevel::from_int(level->get<long long>());
  }
  if (!checked) {
    throw ConfigError(where + ": level must be an integer in [1,5], got " +
                      (level == item.end() ? std::string("<missing>") : level->dump()));
  }
  return Triple{entity->get<std::string>(), entry->category.slug, *checked};
}

}  // namespace

nlohmann::json output_schema(const Taxonomy& taxonomy) {
  nlohmann::json item = {
      {"type", "object"},
      {"properties",
       {{"entity", {{"type", "string"}}},
        {"category", {{"type", "string"}, {"enum", taxonomy.slugs()}}},
        {"level", {{"type", "integer"}, {"enum", {1, 2, 3, 4, 5}}}}}},
      {"required", {"entity", "category", "level"}},
      {"additionalProperties", false},
  };
  return {
      {"type", "object"},
      {"properties", {{"triples", {{"type", "array"}, {"items", std::move(item)}}}}},
      {"required", {"triples"}},
      {"additionalProperties", false},
  };
}

std::string render_triples(const std::vector<Triple>& triples) {
  nlohmann::json list = nlohmann::json::array();
  for (const auto& t : triples) {
    list.push_back({{"entity", t.entity}, {"category", t.category}, {"level", t.level.value()}});
  }
  return nlohmann::json{{"triples", std::move(list)}}.dump();
}

std::string render_rules_text(const Taxonomy& taxonomy) {
  std::ostringstream out;
  out << "Classification and grading rules";
  if (!taxonomy.version().empty()) out << " (version " << taxonomy.version() << ")";
  out << ". Each line is: category slug (label): level.\n";
  std::optional<Group> current;
  for (const auto& e : taxonomy.entries()) {
    if (!current || *current != e.category.group) {
      current = e.category.group;
      out << "[" << group_name(e.category.group) << "]\n";
    }
    out << "- " << e.category.slug;
    if (!e.category.label.empty()) out << " (" << e.category.label << ")";
    out << ": level " << e.default_level.value();
    if (!e.notes.empty()) out << "; " << e.notes;
    out << "\n";
  }
  out << "Key points:\n";
  for (const auto& point : key_points()) {
    bool present = true;
    for (auto slug : point.slugs) present = present && taxonomy.is_compatible(slug);
    if (present) out << "- " << point.text << "\n";
  }
  return out.str();
}

PromptBundle build_prompt(const Taxonomy& taxonomy, std::vector<Exemplar> exemplars,
                          AblationFlags flags) {
  if (taxonomy.empty()) throw ConfigError("prompt: taxonomy is empty");
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    for (const auto& t : exemplars[i].expected_triples) {
      if (!taxonomy.is_compatible(t.category)) {
        throw ConfigError("prompt: exemplar " + std::to_string(i + 1) +
                          " references unknown category '" + t.category + "'");
      }
    }
  }
  PromptBundle bundle;
  bundle.system_text = std::string(kSystemText);
  bundle.task_text = std::string(kTaskText);
  bundle.task_text += flags.schema ? kSchemaSentence : kFreeFormSentence;
  bundle.rules_text = render_rules_text(taxonomy);
  if (flags.few_shot) bundle.exemplars = std::move(exemplars);
  if (flags.schema) bundle.output_schema = output_schema(taxonomy);
  bundle.ablation = flags;
  return bundle;
}

std::vector<Exemplar> load_exemplars(std::istream& in, const Taxonomy& taxonomy) {
  std::vector<Exemplar> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    const std::string where = "exemplars line " + std::to_string(line_no);
    const auto doc = nlohmann::json::parse(line, nullptr, false);
    if (doc.is_discarded() || !doc.is_object()) throw ConfigError(where + ": not a JSON object");
    const auto input = doc.find("input_text");
    if (input == doc.end() || !input->is_string()) {
      throw ConfigError(where + ": missing string 'input_text'");
    }
    const auto triples = doc.find("triples");
    if (triples == doc.end() || !triples->is_array()) {
      throw ConfigError(where + ": missing array 'triples'");
    }
    Exemplar ex{input->get<std::string>(), {}};
    for (const auto& item : *triples) {
      ex.expected_triples.push_back(exemplar_triple(item, taxonomy, where));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

std::vector<Exemplar> load_exemplars_file(const std::filesystem::path& path,
                                          const Taxonomy& taxonomy) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open exemplar file: " + path.string());
  return load_exemplars(in, taxonomy);
}

std::vector<Message> render_messages(const PromptBundle& bundle, std::string_view input_chunk) {
  std::vector<Message> messages;
  messages.reserve(2 + 2 * bundle.exemplars.size());
  messages.push_back(
      {"system", bundle.system_text + "\n\n" + bundle.task_text + "\n\n" + bundle.rules_text});
  for (const auto& ex : bundle.exemplars) {
    messages.push_back({"user", ex.input_text});
    messages.push_back({"assistant", render_triples(ex.expected_triples)});
  }
  messages.push_back({"user", std::string(input_chunk)});
  return messages;
}

}  // namespace phigrade
