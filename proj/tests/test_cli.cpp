#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "tnf/corpus/rare.hpp"
#include "tnf/corpus/sequence.hpp"
#include "tnf/corpus/text.hpp"
#include "tnf/corpus/vocab.hpp"
#include "tnf/trainer/checkpoint.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
};

Result tnf_cli(const std::string& args, const fs::path& cwd) {
    const std::string cmd = "cd '" + cwd.string() + "' && '" TNF_CLI_PATH "' " + args + " 2>&1";
    FILE* p = popen(cmd.c_str(), "r");
    std::string out;
    char buf[4096];
    while (std::size_t n = std::fread(buf, 1, sizeof buf, p)) out.append(buf, n);
    const int status = pclose(p);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::size_t count_lines(const std::string& s) { return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n')); }

const char* kSmall =
    "pretrain --config run.cfg --steps 12 --batch 4 --warmup 2 --model.layers 1 --model.d 16 --model.heads 2 "
    "--model.ffn 32 --model.max_len 32 --eval.every 6 --eval.samples 8 --quiet";

class CliTest : public ::testing::Test {
protected:
    static fs::path dir;

    static void SetUpTestSuite() {
        dir = fs::temp_directory_path() / ("tnf_cli_" + std::to_string(::getpid()));
        fs::remove_all(dir);
        fs::create_directories(dir);
        ASSERT_EQ(tnf_cli("synth --out corp --words 15000 --rare-words 10 --common-words 200 --attributes 8", dir).code,
                  0);
        ASSERT_EQ(tnf_cli("build-vocab --corpus corp/train.txt --vocab-size 300 --out voc", dir).code, 0);
        std::ofstream(dir / "run.cfg") << "data.train = corp/train.txt\ndata.valid = corp/valid.txt\n"
                                          "data.vocab = voc/vocab.txt\ndata.rare = voc/rare.tsv\n";
    }
    static void TearDownTestSuite() { fs::remove_all(dir); }
};

fs::path CliTest::dir;

TEST_F(CliTest, LambdaZeroMatchesNoTnfBaseline) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --no-tnf --out base", dir).code, 0);
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --tnf.lambda 0 --out lam0", dir).code, 0);
    std::string base, lam0;
    for (const auto& [src, dst] : {std::pair{"base", &base}, std::pair{"lam0", &lam0}}) {
        std::istringstream in(slurp(dir / src / "metrics.csv"));
        for (std::string line; std::getline(in, line);) {
            if (line.find("train_loss") != std::string::npos) *dst += line + "\n";
        }
    }
    EXPECT_EQ(count_lines(base), 12u);
    EXPECT_EQ(base, lam0);
}

TEST_F(CliTest, BuildVocabIsDeterministic) {
    ASSERT_EQ(tnf_cli("build-vocab --corpus corp/train.txt --vocab-size 300 --out voc2", dir).code, 0);
    for (const char* f : {"vocab.txt", "freq.tsv", "rare.tsv"}) {
        EXPECT_EQ(slurp(dir / "voc" / f), slurp(dir / "voc2" / f)) << f;
    }
}

TEST_F(CliTest, VocabularyBelowAlphabetIsAConfigError) {
    const auto r = tnf_cli("build-vocab --corpus corp/train.txt --vocab-size 5 --out bad", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("vocab_size"), std::string::npos);
}

TEST_F(CliTest, RareCountMatchesFileLines) {
    const auto r = tnf_cli("stats --corpus corp/valid.txt --vocab voc/vocab.txt --rare voc/rare.tsv --max-len 32", dir);
    ASSERT_EQ(r.code, 0);
    const auto lines = count_lines(slurp(dir / "voc" / "rare.tsv"));
    EXPECT_NE(r.out.find("rare words in set:        " + std::to_string(lines) + "\n"), std::string::npos) << r.out;
}

TEST_F(CliTest, StatsMatchLibraryScan) {
    const auto r = tnf_cli("stats --corpus corp/valid.txt --vocab voc/vocab.txt --rare voc/rare.tsv --max-len 32", dir);
    ASSERT_EQ(r.code, 0);
    const auto vocab = tnf::corpus::SubwordVocab::load(dir / "voc" / "vocab.txt");
    const auto rare = tnf::corpus::load_rare_set(dir / "voc" / "rare.tsv");
    const auto seqs = tnf::corpus::tokenize_corpus(tnf::corpus::read_corpus(dir / "corp" / "valid.txt"), vocab);
    const auto s = tnf::corpus::corpus_rare_stats(seqs, rare, 32);
    const auto want = std::to_string(s.rare_samples) + " / " + std::to_string(s.samples);
    EXPECT_NE(r.out.find(want), std::string::npos) << r.out;
}

TEST_F(CliTest, MissingInputIsADataError) {
    EXPECT_EQ(tnf_cli("stats --corpus corp/valid.txt --vocab voc/vocab.txt --rare nope.tsv", dir).code, 3);
    EXPECT_EQ(tnf_cli("inspect no_such.ckpt", dir).code, 3);
}

TEST_F(CliTest, BadFlagsAreConfigErrors) {
    EXPECT_EQ(tnf_cli("pretrain --steps abc --out z", dir).code, 2);
    EXPECT_EQ(tnf_cli("pretrain --no-such-flag", dir).code, 2);
    EXPECT_EQ(tnf_cli("", dir).code, 2);
    const auto r = tnf_cli("pretrain --preset desk --tnf.gamma 2 --dry-run --out z", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("tnf.gamma"), std::string::npos) << r.out;
}

TEST_F(CliTest, ExportDiscardHasNoDictionary) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --out ex", dir).code, 0);
    ASSERT_EQ(tnf_cli("export --checkpoint ex/final.ckpt --mode discard --out ex/discard.ckpt", dir).code, 0);
    ASSERT_EQ(tnf_cli("export --checkpoint ex/final.ckpt --mode tnf_u --out ex/tnf_u.ckpt", dir).code, 0);
    const auto d = tnf_cli("inspect ex/discard.ckpt", dir);
    ASSERT_EQ(d.code, 0);
    EXPECT_NE(d.out.find("dictionary none"), std::string::npos);
    EXPECT_EQ(d.out.find("notes"), std::string::npos);
    const auto u = tnf_cli("inspect ex/tnf_u.ckpt", dir);
    EXPECT_NE(u.out.find("mode       tnf_u"), std::string::npos);
    const auto rare_lines = count_lines(slurp(dir / "voc" / "rare.tsv"));
    EXPECT_NE(u.out.find("dictionary " + std::to_string(rare_lines) + " entries"), std::string::npos) << u.out;
    EXPECT_EQ(tnf_cli("export --checkpoint ex/final.ckpt --mode tnf_x --out ex/x.ckpt", dir).code, 2);
    const auto m = nlohmann::json::parse(slurp(dir / "ex" / "discard.ckpt.manifest.json"));
    EXPECT_EQ(m["mode"], "discard");
    EXPECT_EQ(m["inputs"]["checkpoint"]["fnv1a"].get<std::string>().size(), 16u);
}

TEST_F(CliTest, ProbePrintsOneRowPerMode) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --out pr", dir).code, 0);
    const auto r = tnf_cli(
        "probe --checkpoint pr/final.ckpt --vocab voc/vocab.txt --train corp/probe_train.tsv "
        "--test corp/probe_test.tsv --epochs 2 --modes discard,tnf_f --random-baseline --out pr/probe",
        dir);
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(count_lines(r.out), 1u + 3u) << r.out;
    const auto m = nlohmann::json::parse(slurp(dir / "pr" / "probe" / "manifest.json"));
    ASSERT_EQ(m["results"].size(), 3u);
    EXPECT_EQ(m["results"][1]["mode"], "tnf_f");
    EXPECT_EQ(m["results"][1]["notes"], "fixed");
}

TEST_F(CliTest, CurvesAlignsRunsByStep) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --out c1", dir).code, 0);
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --no-tnf --out c2", dir).code, 0);
    const auto r = tnf_cli("curves c1 c2 --split val_loss", dir);
    ASSERT_EQ(r.code, 0);
    std::istringstream in(r.out);
    std::string line;
    std::getline(in, line);
    EXPECT_EQ(line, "step,c1,c2");
    std::getline(in, line);
    EXPECT_EQ(line.rfind("6,", 0), 0u);
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
    std::getline(in, line);
    EXPECT_EQ(line.rfind("12,", 0), 0u);
}

TEST_F(CliTest, ResumeThroughTheCli) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --out full", dir).code, 0);
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --stop-at 5 --out half", dir).code, 0);
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --resume --out half", dir).code, 0);
    EXPECT_EQ(slurp(dir / "full" / "metrics.csv"), slurp(dir / "half" / "metrics.csv"));
    EXPECT_EQ(slurp(dir / "full" / "final.ckpt"), slurp(dir / "half" / "final.ckpt"));
    const auto r = tnf_cli(std::string(kSmall) + " --tnf.k 3 --resume --out half", dir);
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.out.find("tnf.k"), std::string::npos) << r.out;
}

TEST_F(CliTest, PaperPresetIsEchoedInManifest) {
    ASSERT_EQ(tnf_cli("pretrain --preset paper --dry-run --out paper", dir).code, 0);
    const auto m = nlohmann::json::parse(slurp(dir / "paper" / "manifest.json"));
    const auto& c = m["config"];
    EXPECT_EQ(c["model.layers"], 12);
    EXPECT_EQ(c["model.d"], 768);
    EXPECT_EQ(c["model.heads"], 12);
    EXPECT_EQ(c["model.ffn"], 3072);
    EXPECT_EQ(c["model.max_len"], 512);
    EXPECT_EQ(c["batch"], 256);
    EXPECT_EQ(c["steps"], 1000000);
    EXPECT_EQ(c["warmup"], 10000);
    EXPECT_DOUBLE_EQ(c["lr"].get<double>(), 1e-4);
    EXPECT_DOUBLE_EQ(c["adam.beta2"].get<double>(), 0.98);
    EXPECT_DOUBLE_EQ(c["adam.eps"].get<double>(), 1e-6);
    EXPECT_DOUBLE_EQ(c["tnf.lambda"].get<double>(), 0.5);
    EXPECT_DOUBLE_EQ(c["tnf.gamma"].get<double>(), 0.1);
    EXPECT_EQ(c["tnf.k"], 16);
    EXPECT_EQ(m["config_hash"].get<std::string>().size(), 16u);
    EXPECT_EQ(m["command"], "pretrain");
}

TEST_F(CliTest, ManifestRecordsInputsAndOutputs) {
    const auto run = tnf_cli(std::string(kSmall) + " --out man", dir);
    ASSERT_EQ(run.code, 0) << run.out;
    const auto m = nlohmann::json::parse(slurp(dir / "man" / "manifest.json"));
    EXPECT_EQ(m["inputs"]["train"]["fnv1a"], m["corpus_hash"]);
    EXPECT_EQ(m["inputs"]["train"]["fnv1a"].get<std::string>().size(), 16u);
    EXPECT_EQ(m["seeds"]["seed"], 1);
    EXPECT_EQ(m["step"], 12);
    EXPECT_EQ(m["outputs"].size(), 4u);
    EXPECT_GT(m["argv"].size(), 5u);
}

TEST_F(CliTest, RtdRunLogsBothLosses) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --objective rtd --out rtd", dir).code, 0);
    const auto csv = slurp(dir / "rtd" / "metrics.csv");
    for (const char* split : {"train_mlm", "train_rtd", "val_gen_mlm", "val_rare_sent_nonotes"}) {
        EXPECT_NE(csv.find(std::string(",") + split + ","), std::string::npos) << split;
    }
    const auto r = tnf_cli("inspect rtd/final.ckpt", dir);
    EXPECT_NE(r.out.find("generator"), std::string::npos) << r.out;
}

TEST_F(CliTest, EvalReproducesFinalValidationRow) {
    ASSERT_EQ(tnf_cli(std::string(kSmall) + " --out ev", dir).code, 0);
    const auto r = tnf_cli("eval --checkpoint ev/final.ckpt", dir);
    ASSERT_EQ(r.code, 0) << r.out;
    double logged = 0.0;
    std::istringstream in(slurp(dir / "ev" / "metrics.csv"));
    for (std::string line; std::getline(in, line);) {
        if (line.rfind("12,val_loss,", 0) == 0) logged = std::stod(line.substr(12));
    }
    char want[64];
    std::snprintf(want, sizeof want, "val_loss                   %.6f", logged);
    EXPECT_NE(r.out.find(want), std::string::npos) << r.out;
}

}  // namespace
