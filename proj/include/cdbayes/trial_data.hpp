#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace cdbayes {

enum class Arm { Placebo = 0, U5000 = 1, U10000 = 2 };
enum class Sex { Female = 0, Male = 1 };

inline constexpr std::array<int, 6> kVisitSchedule{0, 2, 4, 8, 12, 16};
inline constexpr int kMaxScore = 87;
inline constexpr int kSiteCount = 9;

// Wire names ("Placebo", "5000U", "10000U") and display names.
std::string_view arm_wire_name(Arm arm);
std::string_view arm_name(Arm arm);
std::string_view sex_wire_name(Sex sex);
std::string_view sex_name(Sex sex);
inline int arm_code(Arm arm) { return static_cast<int>(arm); }

/// One visit row of the long-format panel.
struct ObservationRecord {
  std::string patient_id;
  int week = 0;
  int site = 1;
  Arm arm = Arm::Placebo;
  int age = 0;
  Sex sex = Sex::Female;
  int score = 0;

  bool operator==(const ObservationRecord&) const = default;
};

/// Validated collection of visit rows. Construct through `PanelDataset::from_records`
/// or `parse_panel`; both enforce every record and cross-record invariant.
class PanelDataset {
 public:
  PanelDataset() = default;

  static PanelDataset from_records(std::vector<ObservationRecord> records);

  const std::vector<ObservationRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }
  std::size_t patient_count() const { return patient_ids_.size(); }

  // Contiguous 0-based index in order of first appearance.
  std::size_t patient_index(const std::string& id) const;
  const std::vector<std::string>& patient_ids() const { return patient_ids_; }
  std::size_t patient_of_row(std::size_t row) const { return patient_of_row_[row]; }
  const std::vector<std::size_t>& patient_of_row() const { return patient_of_row_; }

  // Patients per arm, indexed by arm code.
  const std::array<std::size_t, 3>& arm_counts() const { return arm_counts_; }

 private:
  std::vector<ObservationRecord> records_;
  std::map<std::string, std::size_t> index_;
  std::vector<std::string> patient_ids_;
  std::vector<std::size_t> patient_of_row_;
  std::array<std::size_t, 3> arm_counts_{};
};

inline constexpr std::string_view kPanelHeader = "id,week,site,treat,age,sex,twstrs";

PanelDataset parse_panel(std::istream& in);
PanelDataset parse_panel(std::string_view text);
PanelDataset load_panel(const std::string& path);
void write_panel(std::ostream& out, const PanelDataset& data);

struct BaselineGroup {
  std::string group;
  std::size_t patients = 0;
  double mean_score = 0.0;
  double sd_score = 0.0;
  double mean_age = 0.0;
};

struct BaselineSummary {
  std::vector<BaselineGroup> by_arm;
  std::vector<BaselineGroup> by_sex;
};

/// Week-0 score means/SDs (sample SD) and mean age, grouped by arm and by sex.
/// Groups with no patients are omitted.
BaselineSummary baseline_summary(const PanelDataset& data);

/// Ordered list of covariate terms. A term is a base covariate or an
/// interaction of base covariates joined by ':' (e.g. "treatment:sex").
///
/// Base covariates:
///   intercept, treatment (0/1/2), treat_5000, treat_10000 (dummies), week,
///   week_sq, sex (F=0, M=1), age, dose_onset (treatment * [week >= 2]),
///   site (1..9), site_2 .. site_9 (one-hot against site 1).
struct CovariateSpec {
  std::vector<std::string> terms;
  bool center_age = false;
  bool center_week = false;

  static CovariateSpec full();
  static CovariateSpec final_model();
  static CovariateSpec intercept_only();

  // Comma- or newline-separated terms, '#' starts a comment. Lines of the
  // form "center: age,week" set the centering flags.
  static CovariateSpec parse(std::string_view text);
  std::string to_string() const;
};

// Parent main effects of an interaction term; empty for main effects.
std::vector<std::string> term_parents(const std::string& term);
bool is_interaction(const std::string& term);

struct DesignMatrix {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;  // N x K
  std::vector<std::size_t> patient_of_row;
  std::size_t patient_count = 0;

  std::size_t rows() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t cols() const { return columns.size(); }
  std::optional<std::size_t> column_index(std::string_view name) const;
};

/// Evaluate one term on one record. `age_shift`/`week_shift` are the centering offsets.
double evaluate_term(const std::string& term, const ObservationRecord& rec, double age_shift = 0.0,
                     double week_shift = 0.0);

DesignMatrix encode_design(const PanelDataset& data, const CovariateSpec& spec);

}  // namespace cdbayes
