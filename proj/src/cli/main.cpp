#include "tagfont/pipeline/runner.hpp"

int main(int argc, char** argv) { return tagfont::pipeline::run_cli(argc, argv); }
