#include <doctest.h>

#include <fstream>

#include "cli_runner.hpp"
#include "test_support.hpp"

using fuselens::testing::run_cli;
using fuselens::testing::TempDir;

namespace {

const std::vector<std::string> kBranchAccuracies{"--p0", "0.6", "--p1", "0.9", "--q0", "0.8", "--q1", "0.6"};

std::vector<std::string> with(std::vector<std::string> head, const std::vector<std::string>& tail) {
    head.insert(head.end(), tail.begin(), tail.end());
    return head;
}

std::vector<std::string> splits(const TempDir& d) {
    return {"--base-emb",         (d / "base.emb").string(),     "--novel-emb",
            (d / "novel.emb").string(), "--fs-weights",         (d / "fs_base.json").string(),
            "--zs-weights",       (d / "zs_base.json").string(), "--novel-fs-weights",
            (d / "fs_novel.json").string(), "--novel-zs-weights", (d / "zs_novel.json").string()};
}

std::string first_data_row(const std::string& csv) {
    const auto a = csv.find('\n') + 1;
    return csv.substr(a, csv.find('\n', a) - a);
}

// accuracies of a CSV row "config,base,novel,H"
std::string numbers(const std::string& row) { return row.substr(row.find(',')); }

}  // namespace

TEST_CASE("analyze-hmean prints the maximum at (1, 0)") {
    const auto r = run_cli(with(with({"analyze-hmean"}, kBranchAccuracies), {"--rb", "1", "--rn", "0"}));
    CHECK(r.code == 0);
    CHECK(r.err.empty());
    CHECK(r.out == "rb,rn,Pb,Pn,H\n1.0000,0.0000,0.9000,0.8000,0.8471\n");

    const auto j = run_cli(with(with({"analyze-hmean"}, kBranchAccuracies), {"--rb", "1", "--rn", "0", "--format", "json-doc"}));
    CHECK(j.code == 0);
    CHECK(j.out.find("\"H\": 0.8470588235294118") != std::string::npos);
}

TEST_CASE("exit codes") {
    SUBCASE("usage") {
        CHECK(run_cli({}).code == 2);
        CHECK(run_cli({"frobnicate"}).code == 2);
        const auto r = run_cli(with(with({"analyze-hmean"}, kBranchAccuracies), {"--rb", "1", "--rn", "0", "--bogus"}));
        CHECK(r.code == 2);
        CHECK(r.out.empty());
        CHECK(r.err.rfind("fuselens: error[usage]: ", 0) == 0);
        CHECK(std::count(r.err.begin(), r.err.end(), '\n') == 1);
        CHECK(run_cli(with({"analyze-hmean"}, kBranchAccuracies)).code == 2);
    }
    SUBCASE("invariant") {
        const auto r = run_cli(with(with({"analyze-hmean"}, kBranchAccuracies), {"--rb", "1.5", "--rn", "0"}));
        CHECK(r.code == 4);
        CHECK(r.err.rfind("fuselens: error[invariant]: ", 0) == 0);
        CHECK(run_cli(with({"contour", "--resolution", "1"}, kBranchAccuracies)).code == 4);
    }
    SUBCASE("format") {
        TempDir d("cli");
        std::ofstream(d / "junk.emb") << "FUSLENS1 but not really";
        const auto r = run_cli({"inspect", (d / "junk.emb").string()});
        CHECK(r.code == 3);
        CHECK(r.err.rfind("fuselens: error[format]: ", 0) == 0);
        CHECK(run_cli({"inspect", (d / "missing.emb").string()}).code == 3);
    }
    SUBCASE("help") {
        const auto r = run_cli({"--help"});
        CHECK(r.code == 0);
        CHECK(r.out.find("evaluate") != std::string::npos);
    }
}

TEST_CASE("gen-synthetic then evaluate") {
    TempDir d("cli");
    const auto gen = run_cli({"gen-synthetic", "--out-dir", d.path().string(), "--per-class-count", "12",
                              "--dim", "24"});
    REQUIRE(gen.code == 0);
    CHECK(gen.out ==
          "file,records\nbase.emb,120\nnovel.emb,120\nfs_base.json,10\nzs_base.json,10\n"
          "fs_novel.json,10\nzs_novel.json,10\nspec.json,1\n");

    SUBCASE("defaults") {
        const auto r = run_cli(with({"evaluate"}, splits(d)));
        CHECK(r.code == 0);
        CHECK(r.err.empty());
        CHECK(r.out.rfind("config,base_acc,novel_acc,H\nmode=dynamic;method=entropy;alpha=64;target=weights,", 0) == 0);
    }
    SUBCASE("static 1 equals few-shot only") {
        const auto fused = run_cli(with({"evaluate", "--static", "1.0"}, splits(d)));
        auto fs_twice = splits(d);
        fs_twice[7] = (d / "fs_base.json").string();
        fs_twice[11] = (d / "fs_novel.json").string();
        const auto single = run_cli(with({"evaluate"}, fs_twice));
        REQUIRE(fused.code == 0);
        REQUIRE(single.code == 0);
        CHECK(numbers(first_data_row(fused.out)) == numbers(first_data_row(single.out)));
    }
    SUBCASE("trace") {
        const auto r = run_cli(with({"evaluate", "--alpha", "inf", "--trace", (d / "trace.csv").string()}, splits(d)));
        REQUIRE(r.code == 0);
        std::ifstream in(d / "trace.csv");
        std::string header;
        std::getline(in, header);
        CHECK(header == "sample_id,split,s,predicted,label,correct");
        std::size_t rows = 0;
        for (std::string line; std::getline(in, line);) {
            ++rows;
            const auto s = line.substr(line.find(',', line.find(',') + 1) + 1);
            CHECK((s.rfind("0,", 0) == 0 || s.rfind("1,", 0) == 0 || s.rfind("0.5,", 0) == 0));
        }
        CHECK(rows == 240);
    }
    SUBCASE("sweeps") {
        const auto a = run_cli(with({"sweep-alpha"}, splits(d)));
        REQUIRE(a.code == 0);
        CHECK(std::count(a.out.begin(), a.out.end(), '\n') == 11);
        const auto s = run_cli(with({"sweep-static", "--weights", "0,1"}, splits(d)));
        REQUIRE(s.code == 0);
        CHECK(s.out.find("mode=static;s=0;") != std::string::npos);
        CHECK(run_cli(with({"sweep-alpha", "--alphas", "1,nope"}, splits(d))).code == 2);
        CHECK(run_cli(with({"sweep-static", "--weights", "1.5"}, splits(d))).code == 4);
    }
    SUBCASE("mismatched label spaces") {
        auto args = splits(d);
        args[5] = (d / "fs_novel.json").string();
        CHECK(run_cli(with({"evaluate"}, args)).code == 4);
    }
    SUBCASE("domain-eval") {
        const auto r = run_cli({"domain-eval", "--source-emb", (d / "base.emb").string(), "--target-emb",
                                (d / "base.emb").string(), (d / "base.emb").string(), "--fs-weights",
                                (d / "fs_base.json").string(), "--zs-weights", (d / "zs_base.json").string()});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("config,set,accuracy\n") == 0);
        CHECK(r.out.find(",target_mean,") != std::string::npos);
    }
    SUBCASE("inspect") {
        const auto e = run_cli({"inspect", (d / "base.emb").string()});
        CHECK(e.code == 0);
        CHECK(e.out.find("format,binary-embeddings\ndim,24\ncount,120\n") != std::string::npos);
        const auto c = run_cli({"inspect", (d / "zs_novel.json").string()});
        CHECK(c.code == 0);
        CHECK(c.out.find("kind,zero_shot\n") != std::string::npos);
    }
    SUBCASE("spec file with overriding flags") {
        TempDir d2("cli");
        const auto r = run_cli({"gen-synthetic", "--spec", (d / "spec.json").string(), "--out-dir",
                                d2.path().string(), "--per-class-count", "3"});
        REQUIRE(r.code == 0);
        CHECK(r.out.find("base.emb,30\n") != std::string::npos);
        const auto e = run_cli({"inspect", (d2 / "base.emb").string()});
        CHECK(e.out.find("dim,24\n") != std::string::npos);
    }
}

TEST_CASE("every subcommand is deterministic") {
    TempDir d("cli");
    REQUIRE(run_cli({"gen-synthetic", "--out-dir", d.path().string(), "--per-class-count", "8"}).code == 0);
    const std::vector<std::vector<std::string>> commands{
        with({"evaluate", "--threads", "3"}, splits(d)),
        with({"sweep-alpha"}, splits(d)),
        with({"sweep-static", "--format", "json-doc"}, splits(d)),
        {"domain-eval", "--source-emb", (d / "base.emb").string(), "--target-emb", (d / "base.emb").string(),
         "--fs-weights", (d / "fs_base.json").string(), "--zs-weights", (d / "zs_base.json").string()},
        with(with({"analyze-hmean"}, kBranchAccuracies), {"--rb", "0.3", "--rn", "0.7"}),
        with({"contour", "--resolution", "5"}, kBranchAccuracies),
        with(with({"simulate"}, kBranchAccuracies), {"--rb", "0.8", "--rn", "0.3", "--n-base", "5000", "--n-novel", "5000",
                                         "--seed", "11"}),
        {"inspect", (d / "novel.emb").string()},
    };
    for (const auto& c : commands) {
        CAPTURE(c.front());
        const auto a = run_cli(c);
        const auto b = run_cli(c);
        CHECK(a.code == 0);
        CHECK(!a.out.empty());
        CHECK(a.out == b.out);
    }
    TempDir g1("cli"), g2("cli");
    const auto a = run_cli({"gen-synthetic", "--out-dir", g1.path().string()});
    const auto b = run_cli({"gen-synthetic", "--out-dir", g2.path().string()});
    CHECK(a.out == b.out);
}
