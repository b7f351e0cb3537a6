#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "cdbayes/trial_data.hpp"

namespace testing {

inline std::string data_path(const std::string& name) { return std::string(CDBAYES_DATA_DIR) + "/" + name; }

inline cdbayes::ObservationRecord rec(std::string id, int week, cdbayes::Arm arm = cdbayes::Arm::Placebo,
                                      int score = 40, cdbayes::Sex sex = cdbayes::Sex::Female, int age = 50,
                                      int site = 1) {
  cdbayes::ObservationRecord r;
  r.patient_id = std::move(id);
  r.week = week;
  r.arm = arm;
  r.score = score;
  r.sex = sex;
  r.age = age;
  r.site = site;
  return r;
}

// Mean and standard error of the mean of a sample.
struct MeanSe {
  double mean;
  double se;
};

inline MeanSe mean_se(const std::vector<double>& x) {
  double m = 0.0;
  for (double v : x) m += v;
  m /= static_cast<double>(x.size());
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return {m, std::sqrt(ss / static_cast<double>(x.size() - 1) / static_cast<double>(x.size()))};
}

}  // namespace testing
