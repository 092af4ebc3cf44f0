#include "app/commands.hpp"

int main(int argc, char** argv) { return ninepatch::app::run_cli(argc, argv); }
