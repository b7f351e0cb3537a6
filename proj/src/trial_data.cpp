#include "cdbayes/trial_data.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <set>
#include <sstream>

#include "cdbayes/error.hpp"

namespace cdbayes {

std::string_view arm_wire_name(Arm arm) {
  switch (arm) {
    case Arm::Placebo: return "Placebo";
    case Arm::U5000: return "5000U";
    case Arm::U10000: return "10000U";
  }
  return "?";
}

std::string_view arm_name(Arm arm) {
  switch (arm) {
    case Arm::Placebo: return "Placebo";
    case Arm::U5000: return "U5000";
    case Arm::U10000: return "U10000";
  }
  return "?";
}

std::string_view sex_wire_name(Sex sex) { return sex == Sex::Female ? "F" : "M"; }
std::string_view sex_name(Sex sex) { return sex == Sex::Female ? "Female" : "Male"; }

namespace {

bool in_schedule(int week) {
  return std::find(kVisitSchedule.begin(), kVisitSchedule.end(), week) != kVisitSchedule.end();
}

std::string describe(const ObservationRecord& r) {
  return "patient '" + r.patient_id + "' week " + std::to_string(r.week);
}

}  // namespace

PanelDataset PanelDataset::from_records(std::vector<ObservationRecord> records) {
  PanelDataset data;
  std::set<std::pair<std::size_t, int>> seen;
  std::vector<const ObservationRecord*> first_row;

  for (const auto& r : records) {
    if (r.patient_id.empty())
      throw Error(ErrorKind::InvariantViolation, "empty patient id");
    if (!in_schedule(r.week))
      throw Error(ErrorKind::InvariantViolation,
                  describe(r) + ": week not in visit schedule {0,2,4,8,12,16}");
    if (r.score < 0 || r.score > kMaxScore)
      throw Error(ErrorKind::InvariantViolation,
                  describe(r) + ": score " + std::to_string(r.score) + " outside [0,87]");
    if (r.site < 1 || r.site > kSiteCount)
      throw Error(ErrorKind::InvariantViolation,
                  describe(r) + ": site " + std::to_string(r.site) + " outside [1,9]");
    if (r.age <= 0)
      throw Error(ErrorKind::InvariantViolation,
                  describe(r) + ": age must be positive");

    auto [it, inserted] = data.index_.try_emplace(r.patient_id, data.patient_ids_.size());
    if (inserted) {
      data.patient_ids_.push_back(r.patient_id);
      first_row.push_back(&r);
      data.arm_counts_[static_cast<std::size_t>(arm_code(r.arm))] += 1;
    } else {
      const auto& f = *first_row[it->second];
      if (f.arm != r.arm || f.sex != r.sex || f.age != r.age || f.site != r.site)
        throw Error(ErrorKind::InvariantViolation,
                    describe(r) + ": arm/sex/age/site differ from the patient's earlier visits");
    }
    if (!seen.emplace(it->second, r.week).second)
      throw Error(ErrorKind::InvariantViolation, describe(r) + ": duplicate visit");
    data.patient_of_row_.push_back(it->second);
  }
  data.records_ = std::move(records);
  return data;
}

std::size_t PanelDataset::patient_index(const std::string& id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw Error(ErrorKind::InvariantViolation, "unknown patient '" + id + "'");
  return it->second;
}

// ---------------------------------------------------------------------------
// CSV wire format

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    auto pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      return out;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

int parse_int(std::string_view field, const char* name, std::size_t line_no) {
  int value = 0;
  auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
  if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
    // Accept integral decimals such as "12.0".
    double d = 0.0;
    auto [p2, ec2] = std::from_chars(field.data(), field.data() + field.size(), d);
    if (!field.empty() && ec2 == std::errc() && p2 == field.data() + field.size() &&
        std::floor(d) == d && std::abs(d) < 1e9)
      return static_cast<int>(d);
    throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": field '" + name +
                                             "' value '" + std::string(field) +
                                             "' is not an integer");
  }
  return value;
}

}  // namespace

PanelDataset parse_panel(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  if (!std::getline(in, line)) throw Error(ErrorKind::SchemaError, "empty input, missing header");
  ++line_no;
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  if (line != kPanelHeader)
    throw Error(ErrorKind::SchemaError, "header must be exactly '" + std::string(kPanelHeader) +
                                            "', got '" + line + "'");

  std::vector<ObservationRecord> records;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_fields(line);
    if (fields.size() != 7)
      throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": expected 7 fields, got " +
                                               std::to_string(fields.size()));
    ObservationRecord r;
    if (fields[0].empty())
      throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": empty id");
    r.patient_id = std::string(fields[0]);
    r.week = parse_int(fields[1], "week", line_no);
    r.site = parse_int(fields[2], "site", line_no);
    if (fields[3] == "Placebo") r.arm = Arm::Placebo;
    else if (fields[3] == "5000U") r.arm = Arm::U5000;
    else if (fields[3] == "10000U") r.arm = Arm::U10000;
    else
      throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": treat '" +
                                               std::string(fields[3]) + "' not in {Placebo,5000U,10000U}");
    r.age = parse_int(fields[4], "age", line_no);
    if (fields[5] == "F") r.sex = Sex::Female;
    else if (fields[5] == "M") r.sex = Sex::Male;
    else
      throw Error(ErrorKind::MalformedRow, "line " + std::to_string(line_no) + ": sex '" +
                                               std::string(fields[5]) + "' not in {F,M}");
    r.score = parse_int(fields[6], "twstrs", line_no);
    records.push_back(std::move(r));
  }
  return PanelDataset::from_records(std::move(records));
}

PanelDataset parse_panel(std::string_view text) {
  std::istringstream in{std::string(text)};
  return parse_panel(in);
}

PanelDataset load_panel(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open data file '" + path + "'");
  return parse_panel(in);
}

void write_panel(std::ostream& out, const PanelDataset& data) {
  out << kPanelHeader << '\n';
  for (const auto& r : data.records()) {
    out << r.patient_id << ',' << r.week << ',' << r.site << ',' << arm_wire_name(r.arm) << ','
        << r.age << ',' << sex_wire_name(r.sex) << ',' << r.score << '\n';
  }
}

// ---------------------------------------------------------------------------

BaselineSummary baseline_summary(const PanelDataset& data) {
  std::vector<const ObservationRecord*> baseline(data.patient_count(), nullptr);
  for (std::size_t row = 0; row < data.size(); ++row) {
    const auto& r = data.records()[row];
    if (r.week == 0) baseline[data.patient_of_row(row)] = &r;
  }
  for (std::size_t i = 0; i < baseline.size(); ++i)
    if (baseline[i] == nullptr)
      throw Error(ErrorKind::MissingBaseline, "patient '" + data.patient_ids()[i] + "' has no week-0 row");

  auto summarize_group = [&](const std::string& name, auto&& member) {
    BaselineGroup g;
    g.group = name;
    double sum = 0.0;
    double age_sum = 0.0;
    for (const auto* r : baseline)
      if (member(*r)) {
        ++g.patients;
        sum += r->score;
        age_sum += r->age;
      }
    if (g.patients == 0) return g;
    g.mean_score = sum / static_cast<double>(g.patients);
    g.mean_age = age_sum / static_cast<double>(g.patients);
    double ss = 0.0;
    for (const auto* r : baseline)
      if (member(*r)) ss += (r->score - g.mean_score) * (r->score - g.mean_score);
    g.sd_score = g.patients > 1 ? std::sqrt(ss / static_cast<double>(g.patients - 1)) : 0.0;
    return g;
  };

  BaselineSummary out;
  for (Arm arm : {Arm::Placebo, Arm::U5000, Arm::U10000}) {
    auto g = summarize_group(std::string(arm_name(arm)), [arm](const ObservationRecord& r) { return r.arm == arm; });
    if (g.patients > 0) out.by_arm.push_back(g);
  }
  for (Sex sex : {Sex::Female, Sex::Male}) {
    auto g = summarize_group(std::string(sex_name(sex)), [sex](const ObservationRecord& r) { return r.sex == sex; });
    if (g.patients > 0) out.by_sex.push_back(g);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Covariate specification and design encoding

CovariateSpec CovariateSpec::full() {
  return {{"intercept", "treatment", "week", "week_sq", "sex", "age", "dose_onset", "site",
           "treatment:sex", "treatment:week", "treatment:site", "sex:age", "sex:week",
           "dose_onset:site", "age:week"}};
}

CovariateSpec CovariateSpec::final_model() {
  return {{"intercept", "treatment", "week", "week_sq", "sex", "site"}};
}

CovariateSpec CovariateSpec::intercept_only() { return {{"intercept"}}; }

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

std::vector<std::string> split_terms(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto pos = text.find(',', start);
    auto piece = trim(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (!piece.empty()) out.emplace_back(piece);
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

bool is_base_covariate(std::string_view name) {
  static const std::set<std::string, std::less<>> base{
      "intercept", "treatment", "treat_5000", "treat_10000", "week", "week_sq",
      "sex",       "age",       "dose_onset", "site"};
  if (base.count(name) != 0) return true;
  if (name.size() == 6 && name.substr(0, 5) == "site_") return name[5] >= '2' && name[5] <= '9';
  return false;
}

double evaluate_base(std::string_view name, const ObservationRecord& r, double age_shift, double week_shift) {
  const double week = r.week - week_shift;
  if (name == "intercept") return 1.0;
  if (name == "treatment") return arm_code(r.arm);
  if (name == "treat_5000") return r.arm == Arm::U5000 ? 1.0 : 0.0;
  if (name == "treat_10000") return r.arm == Arm::U10000 ? 1.0 : 0.0;
  if (name == "week") return week;
  if (name == "week_sq") return week * week;
  if (name == "sex") return r.sex == Sex::Male ? 1.0 : 0.0;
  if (name == "age") return r.age - age_shift;
  if (name == "dose_onset") return r.week >= 2 ? arm_code(r.arm) : 0.0;
  if (name == "site") return r.site;
  if (name.substr(0, 5) == "site_") return r.site == name[5] - '0' ? 1.0 : 0.0;
  throw Error(ErrorKind::UnknownCovariate, "unknown covariate '" + std::string(name) + "'");
}

void check_term(const std::string& term) {
  auto parents = term_parents(term);
  if (parents.empty()) parents.push_back(term);
  for (const auto& p : parents)
    if (!is_base_covariate(p) || (parents.size() > 1 && p == "intercept"))
      throw Error(ErrorKind::UnknownCovariate, "unknown covariate '" + p + "' in term '" + term + "'");
}

}  // namespace

CovariateSpec CovariateSpec::parse(std::string_view text) {
  CovariateSpec spec;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    std::string_view view = line;
    if (auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    view = trim(view);
    if (view.empty()) continue;
    if (view.substr(0, 7) == "center:") {
      for (const auto& name : split_terms(view.substr(7))) {
        if (name == "age") spec.center_age = true;
        else if (name == "week") spec.center_week = true;
        else throw Error(ErrorKind::UnknownCovariate, "cannot center '" + name + "'");
      }
      continue;
    }
    for (auto& t : split_terms(view)) spec.terms.push_back(std::move(t));
  }
  if (spec.terms.empty()) throw Error(ErrorKind::EmptySpec, "covariate spec lists no terms");
  for (const auto& t : spec.terms) check_term(t);
  return spec;
}

std::string CovariateSpec::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    if (i) out += ',';
    out += terms[i];
  }
  if (center_age || center_week) {
    out += ";center:";
    if (center_age) out += "age";
    if (center_age && center_week) out += ',';
    if (center_week) out += "week";
  }
  return out;
}

std::vector<std::string> term_parents(const std::string& term) {
  std::vector<std::string> parents;
  if (term.find(':') == std::string::npos) return parents;
  std::size_t start = 0;
  for (;;) {
    auto pos = term.find(':', start);
    parents.push_back(term.substr(start, pos == std::string::npos ? std::string::npos : pos - start));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return parents;
}

bool is_interaction(const std::string& term) { return term.find(':') != std::string::npos; }

std::optional<std::size_t> DesignMatrix::column_index(std::string_view name) const {
  for (std::size_t k = 0; k < columns.size(); ++k)
    if (columns[k] == name) return k;
  return std::nullopt;
}

double evaluate_term(const std::string& term, const ObservationRecord& rec, double age_shift,
                     double week_shift) {
  if (!is_interaction(term)) return evaluate_base(term, rec, age_shift, week_shift);
  double v = 1.0;
  for (const auto& p : term_parents(term)) v *= evaluate_base(p, rec, age_shift, week_shift);
  return v;
}

DesignMatrix encode_design(const PanelDataset& data, const CovariateSpec& spec) {
  if (spec.terms.empty()) throw Error(ErrorKind::EmptySpec, "covariate spec lists no terms");
  std::vector<std::string> columns;
  std::set<std::string> unique;
  for (const auto& t : spec.terms) {
    check_term(t);
    if (!unique.insert(t).second)
      throw Error(ErrorKind::InvariantViolation, "term '" + t + "' listed twice");
  }
  // Intercept always leads.
  if (unique.count("intercept")) columns.push_back("intercept");
  for (const auto& t : spec.terms)
    if (t != "intercept") columns.push_back(t);

  double age_shift = 0.0;
  double week_shift = 0.0;
  if (data.size() > 0) {
    for (const auto& r : data.records()) {
      age_shift += r.age;
      week_shift += r.week;
    }
    age_shift /= static_cast<double>(data.size());
    week_shift /= static_cast<double>(data.size());
  }
  if (!spec.center_age) age_shift = 0.0;
  if (!spec.center_week) week_shift = 0.0;

  DesignMatrix design;
  design.columns = columns;
  design.values.resize(static_cast<Eigen::Index>(data.size()), static_cast<Eigen::Index>(columns.size()));
  for (std::size_t row = 0; row < data.size(); ++row)
    for (std::size_t k = 0; k < columns.size(); ++k)
      design.values(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(k)) =
          evaluate_term(columns[k], data.records()[row], age_shift, week_shift);
  design.patient_of_row = data.patient_of_row();
  design.patient_count = data.patient_count();
  return design;
}

}  // namespace cdbayes
