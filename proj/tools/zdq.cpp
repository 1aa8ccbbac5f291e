#include "zdq/cli.hpp"

int main(int argc, char** argv) { return zdq::run(argc, argv); }
