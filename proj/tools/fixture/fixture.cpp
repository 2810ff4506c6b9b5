#include "fixture.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>
#include <set>

#include "phigrade/corpus.hpp"
#include "phigrade/error.hpp"
#include "phigrade/prompt.hpp"
#include "phigrade/text.hpp"

namespace phigrade::fixture {
namespace {

const std::vector<std::string> kComplaints = {
    "咳嗽两周", "胃痛三天", "头晕乏力一个月", "皮肤瘙痒", "失眠多梦", "腰痛半年",
    "月经不规律", "胸闷气短", "反复腹泻", "关节疼痛", "口腔溃疡", "耳鸣",
};
const std::vector<std::string> kCommonDiseases = {
    "高血压", "糖尿病", "慢性胃炎", "过敏性鼻炎", "颈椎病", "甲状腺结节",
    "支气管炎", "腰椎间盘突出", "痛风", "脂肪肝", "偏头痛", "湿疹",
};
const std::vector<std::string> kSpecialDiseases = {
    "梅毒", "尖锐湿疣", "肺结核", "乙型肝炎", "抑郁症", "焦虑症", "精神分裂症",
    "乳腺癌", "肺癌", "白血病", "地中海贫血", "血友病", "混合痔", "肛瘘",
    "系统性红斑狼疮", "重症肌无力",
};
const std::vector<std::string> kHighRiskHpv = {"16", "18", "31", "33", "35", "39", "45", "51",
                                               "52", "56", "58", "59", "68", "73", "82"};
const std::vector<std::string> kLowRiskHpv = {"6", "11", "42", "43", "44"};
const std::vector<std::string> kInfectionTests = {"HIV抗体", "梅毒抗体", "乙肝表面抗原", "HCV抗体"};
const std::vector<std::pair<std::string, std::string>> kRoutineTests = {
    {"血常规", "白细胞偏高"}, {"肝功能", "转氨酶升高"}, {"尿常规", "尿蛋白阴性"},
    {"甲功", "TSH偏低"},     {"血脂", "甘油三酯偏高"}, {"心电图", "窦性心律"},
};
const std::vector<std::string> kMedications = {"阿莫西林", "布洛芬", "二甲双胍", "氨氯地平",
                                               "奥美拉唑", "氯雷他定", "阿托伐他汀"};
const std::vector<std::string> kHospitals = {"协和医院", "华山医院", "湘雅医院", "华西医院",
                                             "中山医院", "同济医院"};
const std::vector<std::string> kDepartments = {"消化内科", "心内科", "皮肤科", "呼吸科",
                                               "妇科", "内分泌科", "神经内科"};
const std::vector<std::string> kCities = {"杭州", "成都", "武汉", "南京", "西安", "长沙"};
const std::vector<std::string> kSurnames = {"王", "李", "张", "刘", "陈", "杨", "赵"};
const std::vector<std::string> kAdvice = {
    "按时服药，定期复查", "清淡饮食，注意休息", "尽快到医院面诊", "保持规律作息",
    "多喝水，避免熬夜", "遵医嘱用药，一个月后复诊",
};
const std::vector<std::string> kFiller = {
    "平时工作比较忙，经常加班到很晚。", "饮食方面以清淡为主，很少吃辣。",
    "每天晚上十一点左右睡觉。",         "周末会出去散步锻炼身体。",
    "家里人都很关心我的情况。",         "之前没有做过类似的检查。",
    "最近天气变化比较大。",             "我平时也会看一些健康方面的文章。",
    "单位每年都会组织体检。",           "上班需要坐很久，很少活动。",
};

template <typename T>
const T& choose(std::mt19937_64& rng, const std::vector<T>& pool) {
  return pool[rng() % pool.size()];
}

bool chance(std::mt19937_64& rng, int percent) { return static_cast<int>(rng() % 100) < percent; }

struct Draft {
  std::string text;
  std::vector<Triple> triples;
};

void add(Draft& d, const Taxonomy& taxonomy, const std::string& entity, const std::string& category,
         std::optional<int> level = std::nullopt) {
  d.triples.push_back(Triple{entity, category,
                             level ? SensitivityLevel(*level) : taxonomy.default_level(category)});
}

Draft draft_record(std::mt19937_64& rng, const std::vector<std::string>& names,
                   const Taxonomy& taxonomy, bool padded) {
  Draft d;
  std::string opening = "患者：医生您好，";
  if (chance(rng, 70)) {
    const auto& name = choose(rng, names);
    opening += "我是" + name + "，";
    add(d, taxonomy, name, "patient name");
  }
  if (chance(rng, 80)) {
    const std::string age = std::to_string(18 + rng() % 60) + "岁";
    opening += "今年" + age + "，";
    add(d, taxonomy, age, "age");
  }
  if (chance(rng, 60)) {
    const std::string gender = chance(rng, 50) ? "男性" : "女性";
    opening += gender + "，";
    add(d, taxonomy, gender, "gender");
  }
  if (chance(rng, 90)) {
    const auto& complaint = choose(rng, kComplaints);
    opening += "最近" + complaint + "。";
    add(d, taxonomy, complaint, "chief complaint");
  } else {
    opening += "想咨询一下。";
  }

  // Exactly one clinical scenario per record; uncertainty markers only ever
  // appear in scenarios whose only disease mention is the uncertain one.
  std::string clinical;
  const int roll = static_cast<int>(rng() % 100);
  // Cumulative weights: common 30, special 20, suspected 10, ruled out 8,
  // HPV 12, infection test 8, routine test 12. Padded records stay affirmed.
  static const int kCumulative[] = {30, 50, 60, 68, 80, 88, 100};
  int scenario = 0;
  while (roll >= kCumulative[scenario]) ++scenario;
  if (padded) scenario = roll < 50 ? 0 : 1;
  switch (scenario) {
    case 0: {
      const auto& disease = choose(rng, kCommonDiseases);
      const auto& hospital = choose(rng, kHospitals);
      const auto& department = choose(rng, kDepartments);
      clinical = "之前在" + hospital + department + "确诊了" + disease + "，";
      add(d, taxonomy, disease, "disease");
      add(d, taxonomy, hospital, "hospital");
      add(d, taxonomy, department, "department");
      if (chance(rng, 70)) {
        const auto& med = choose(rng, kMedications);
        clinical += "一直在吃" + med + "。";
        add(d, taxonomy, med, "medication name");
      } else {
        clinical += "一直没有用药。";
      }
      break;
    }
    case 1: {
      const auto& disease = choose(rng, kSpecialDiseases);
      const std::string date = "2019年" + std::to_string(1 + rng() % 12) + "月" +
                               std::to_string(1 + rng() % 28) + "日";
      clinical = date + "确诊" + disease + "，目前在治疗中。";
      add(d, taxonomy, disease, "special disease", 5);
      add(d, taxonomy, date, "date");
      break;
    }
    case 2: {
      const auto& disease = choose(rng, kSpecialDiseases);
      clinical = "医生怀疑是" + disease + "，还需要进一步检查。";
      add(d, taxonomy, disease, "disease-suspected", 2);
      break;
    }
    case 3: {
      const auto& disease = choose(rng, kSpecialDiseases);
      clinical = "上次检查已经排除了" + disease + "。";
      add(d, taxonomy, disease, "disease-ruled out", 2);
      break;
    }
    case 4: {
      const bool high = chance(rng, 70);
      const std::string result =
          "HPV" + (high ? choose(rng, kHighRiskHpv) : choose(rng, kLowRiskHpv)) + "阳性";
      clinical = "体检做了TCT检查，发现" + result + "。";
      add(d, taxonomy, "TCT检查", "test/exam name");
      if (high) {
        add(d, taxonomy, result, "sensitive test result", 5);
      } else {
        add(d, taxonomy, result, "test/exam result");
      }
      break;
    }
    case 5: {
      const std::string result = choose(rng, kInfectionTests) + "阳性";
      clinical = "术前检查提示" + result + "，很担心。";
      add(d, taxonomy, result, "sensitive test result", 5);
      break;
    }
    default: {
      const auto& [test, result] = choose(rng, kRoutineTests);
      clinical = "做了" + test + "，结果显示" + result + "。";
      add(d, taxonomy, test, "test/exam name");
      add(d, taxonomy, result, "test/exam result");
      break;
    }
  }

  std::string extras;
  if (chance(rng, 25)) {
    const std::string bp = "血压" + std::to_string(120 + rng() % 50) + "/" +
                           std::to_string(70 + rng() % 30) + "mmHg";
    extras += "量了一下" + bp + "。";
    add(d, taxonomy, bp, "blood pressure");
  }
  if (chance(rng, 15)) {
    std::string phone = "13";
    for (int i = 0; i < 9; ++i) phone += static_cast<char>('0' + rng() % 10);
    extras += "我的电话是" + phone + "。";
    add(d, taxonomy, phone, "phone number");
  }
  if (chance(rng, 10)) {
    const std::string beds = "床位" + std::to_string(300 + rng() % 1500) + "张";
    extras += "听说那家医院有" + beds + "。";
    add(d, taxonomy, beds, "hospital basic data / number of beds");
  }
  if (chance(rng, 30)) {
    const auto& city = choose(rng, kCities);
    extras += "我现在住在" + city + "。";
    add(d, taxonomy, city, "address-city");
  }

  std::string reply = "\n医生：";
  if (chance(rng, 40)) {
    const auto& surname = choose(rng, kSurnames);
    reply = "\n医生：您好，我是" + surname + "医生。";
    add(d, taxonomy, surname, "doctor surname");
  }
  reply += "建议您" + choose(rng, kAdvice) + "。";

  if (!padded) {
    d.text = opening + clinical + extras + reply;
  } else {
    auto filler = [&](std::size_t chars) {
      std::string out;
      std::size_t n = 0;
      while (n < chars) {
        const auto& s = choose(rng, kFiller);
        out += s;
        n += text::code_point_offsets(s).size() - 1;
      }
      return out;
    };
    const std::size_t budget = 2500 + rng() % 2500;
    d.text = opening + filler(budget) + clinical + filler(budget) + extras + reply;
  }
  // Exact duplicates can arise from repeated picks (e.g. one city twice).
  std::sort(d.triples.begin(), d.triples.end(), risk_order);
  d.triples.erase(std::unique(d.triples.begin(), d.triples.end()), d.triples.end());
  return d;
}

std::string describe(const Triple& t) {
  return "(" + t.entity + ", " + t.category + ", " + std::to_string(t.level.value()) + ")";
}

}  // namespace

ReplayTable Fixture::replay_table() const {
  ReplayTable table;
  for (const auto& e : replay_entries) table.emplace(text::fingerprint(e.chunk_text), e.response);
  return table;
}

Fixture make_fixture(const Options& options, const Taxonomy& taxonomy, const RulePack& rules) {
  std::mt19937_64 rng(options.seed);
  const NamePool pool(options.seed);
  Fixture fx;
  std::map<std::string, std::string> responses_by_fingerprint;
  for (std::size_t i = 0; i < options.records; ++i) {
    const bool padded = options.long_record_every > 0 && (i + 1) % options.long_record_every == 0;
    Draft d = draft_record(rng, pool.names(), taxonomy, padded);
    char id[16];
    std::snprintf(id, sizeof id, "R%04zu", i + 1);

    std::set<std::size_t> covered;
    for (const auto& piece :
         chunk(d.text, options.chunking.max_chunk_chars, options.chunking.overlap_chars)) {
      std::vector<Triple> visible;
      for (std::size_t k = 0; k < d.triples.size(); ++k) {
        if (piece.text.find(d.triples[k].entity) == std::string::npos) continue;
        visible.push_back(d.triples[k]);
        covered.insert(k);
      }
      for (const auto& t : visible) {
        const auto decision = apply_rules(t, piece.text, rules);
        if (!(decision.triple_after == t)) {
          throw Error(std::string("fixture ") + id + ": rules rewrite " + describe(t) + " to " +
                      describe(decision.triple_after));
        }
      }
      std::string response = render_triples(visible);
      const auto fp = text::fingerprint(piece.text);
      if (const auto [it, inserted] = responses_by_fingerprint.emplace(fp, response);
          !inserted && it->second != response) {
        throw Error(std::string("fixture ") + id + ": chunk collides with a different record");
      }
      fx.replay_entries.push_back(ReplayEntry{id, piece.text, std::move(response)});
    }
    if (covered.size() != d.triples.size()) {
      throw Error(std::string("fixture ") + id + ": a gold entity is missing from every chunk");
    }
    fx.records.push_back(ConsultationRecord{id, d.text, {{"department", "online consultation"}}});
    fx.gold.push_back(GoldRecord{id, std::move(d.triples)});
  }
  return fx;
}

void write_fixture(const Fixture& fixture, const std::filesystem::path& dir,
                   const Taxonomy& taxonomy) {
  std::filesystem::create_directories(dir);
  Table corpus;
  corpus.header = {"record_id", "Description", "department"};
  for (const auto& r : fixture.records) {
    corpus.rows.push_back({r.record_id, r.description, r.metadata.at("department")});
  }
  write_table(dir / "corpus.jsonl", corpus);

  std::vector<ResultRow> rows;
  for (const auto& g : fixture.gold) {
    for (const auto& t : g.triples) {
      rows.push_back(ResultRow{g.record_id, t.entity, t.category, t.level.value(), {},
                               taxonomy.label_of(t.category)});
    }
    if (g.triples.empty()) rows.push_back(ResultRow{g.record_id, "", "", nullptr, {}, ""});
  }
  write_rows(dir / "gold.jsonl", rows);

  std::ofstream replay(dir / "replay.jsonl", std::ios::binary | std::ios::trunc);
  if (!replay) throw IoError("cannot write " + (dir / "replay.jsonl").string());
  for (const auto& e : fixture.replay_entries) {
    nlohmann::ordered_json row = {{"record_id", e.record_id},
                                  {"fingerprint", text::fingerprint(e.chunk_text)},
                                  {"response", e.response}};
    replay << row.dump() << '\n';
  }
}

}  // namespace phigrade::fixture
