#!/usr/bin/env python3
"""Misbehaving stand-in for an SMT solver, driven by the first argument.

hang        answers echo, never answers check-sat
crash       exits as soon as check-sat arrives
unknown     answers check-sat with unknown (reason: incomplete)
reject      rejects every set-option
no-timeout  rejects only :timeout, otherwise like unknown
proxy-crash FLAG CMD...
            first run (FLAG absent): creates FLAG, forwards to CMD and exits
            at the first check-sat; later runs exec CMD directly
"""
import os
import re
import subprocess
import sys
import time

ECHO = re.compile(r'^\(echo "(.*)"\)$')


def out(text):
    sys.stdout.write(text + "\n")
    sys.stdout.flush()


def main():
    mode = sys.argv[1]
    if mode == "proxy-crash":
        flag, cmd = sys.argv[2], sys.argv[3:]
        if os.path.exists(flag):
            os.execvp(cmd[0], cmd)
        open(flag, "w").close()
        child = subprocess.Popen(cmd, stdin=subprocess.PIPE, text=True)
        for line in sys.stdin:
            if line.strip() == "(check-sat)":
                child.kill()
                sys.exit(1)
            child.stdin.write(line)
            child.stdin.flush()
        return

    for line in sys.stdin:
        line = line.strip()
        m = ECHO.match(line)
        if m:
            out(m.group(1))
        elif line.startswith("(set-option"):
            if mode == "reject" or (mode == "no-timeout" and ":timeout" in line):
                out('(error "unsupported option")')
        elif line == "(check-sat)":
            if mode == "hang":
                time.sleep(3600)
            elif mode == "crash":
                sys.exit(3)
            else:
                out("unknown")
        elif line.startswith("(get-info :reason-unknown"):
            out('(:reason-unknown "incomplete")')
        elif line == "(exit)":
            return


if __name__ == "__main__":
    main()
