#include <gtest/gtest.h>

#include "drivattn/report.hpp"

using namespace drivattn;

namespace {

EvalReport full_report() {
  EvalReport rep;
  double v = 60.0;
  for (const auto& key : table_cells()) {
    if (key.protocol == "mixed") {
      add_mixed(rep, key, v / 100.0);
    } else {
      LosoResult r;
      r.folds = {{3, 0.5, 10, 5}, {7, 0.75, 10, 4}};
      r.mean = 0.625;
      add_loso(rep, key, r);
    }
    v += 1.25;
  }
  return rep;
}

}  // namespace

TEST(Report, TableHasTwelveCells) {
  const auto cells = table_cells();
  ASSERT_EQ(cells.size(), 12u);
  EXPECT_EQ(cells.front().model, "svm");
  EXPECT_EQ(cells.back().input, "raw");
  EXPECT_EQ(cells.back().protocol, "loso");
  EXPECT_EQ(cells.back().session, Session::KMinus);
}

TEST(Report, ReferenceGridIsComplete) {
  const auto ref = reference_report();
  EXPECT_EQ(ref.rows.size(), 12u);
  for (const auto& k : table_cells()) EXPECT_TRUE(ref.cell(k).has_value());
  EXPECT_EQ(*ref.cell({"eegnet", "raw", Session::KPlus, "mixed"}), 88.96);
  EXPECT_EQ(*ref.cell({"svm", "bands", Session::KMinus, "loso"}), 77.20);
  EXPECT_EQ(*ref.cell({"eegnet", "raw", Session::KPlus, "loso"}), 75.51);
  const auto text = render_table(ref, table_cells());
  EXPECT_NE(text.find("88.96"), std::string::npos);
  EXPECT_NE(text.find("69.35"), std::string::npos);
}

TEST(Report, CsvRoundTripIsExact) {
  auto rep = full_report();
  rep.rows.front().accuracy_pct = 100.0 / 3.0;
  const auto csv = report_csv(rep);
  const auto back = parse_report_csv(csv);
  EXPECT_EQ(back.rows, rep.rows);
  EXPECT_EQ(report_csv(back), csv);
  EXPECT_EQ(render_table(back, table_cells()), render_table(rep, table_cells()));
}

TEST(Report, LosoRowsCarryFoldAndSubject) {
  const auto rep = full_report();
  const CellKey k{"svm", "bands", Session::KPlus, "loso"};
  EXPECT_EQ(rep.fold_count(k), 2u);
  EXPECT_EQ(rep.per_subject(k).at(7), 75.0);
  EXPECT_EQ(*rep.cell(k), 62.5);
  const auto csv = report_csv(rep);
  EXPECT_NE(csv.find("svm,bands,kplus,loso,50,0,3\n"), std::string::npos);
  EXPECT_NE(csv.find("svm,bands,kplus,mixed,60,,\n"), std::string::npos);
}

TEST(Report, MissingCellRejected) {
  const auto rep = full_report();
  try {
    render_table(rep, {});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::MissingCell);
  }
  EvalReport partial;
  add_mixed(partial, {"svm", "bands", Session::KPlus, "mixed"}, 0.8);
  EXPECT_THROW(render_table(partial, table_cells()), Error);
  EXPECT_NO_THROW(render_table(partial, {{"svm", "bands", Session::KPlus, "mixed"}}));
}

TEST(Report, RendersTwoDecimalsAndSections) {
  auto rep = full_report();
  rep.statistics = {{"wilcoxon_z", -2.04}, {"wilcoxon_p", 0.041}};
  rep.seeds = {{"master", 1}};
  const auto text = emit_report(rep, table_cells());
  EXPECT_NE(text.find("60.00"), std::string::npos);
  EXPECT_NE(text.find("[per-subject LOSO accuracy, %]"), std::string::npos);
  EXPECT_NE(text.find("wilcoxon_z=-2.04"), std::string::npos);
  EXPECT_NE(text.find("seed.master=1"), std::string::npos);
}

TEST(Report, BadCsvRejected) {
  EXPECT_THROW(parse_report_csv("bad,header\n"), Error);
  EXPECT_THROW(parse_report_csv("model,input,session,protocol,accuracy_pct,fold,subject_id\nsvm,bands,kplus,mixed\n"),
               Error);
  EXPECT_THROW(parse_report_csv("model,input,session,protocol,accuracy_pct,fold,subject_id\nsvm,bands,kplus,mixed,x,,\n"),
               Error);
}
