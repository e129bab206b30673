#include "kgrec/cli/app.hpp"

int main(int argc, char** argv) { return kgrec::cli::run(argc, argv); }
