package com.acme.text;

import java.util.List;

public class Reader {
    public Reader() {
    }

    public int parse(String text) {
        if (text == null || text.isEmpty()) {
            return 0;
        }
        int total = 0;
        for (String part : text.split(",")) {
            String t = part.trim();
            if (!t.isEmpty()) {
                total += Integer.parseInt(t);
            }
        }
        return total;
    }

    public int parse(String text, int radix) {
        if (radix < 2) {
            throw new IllegalArgumentException("radix");
        }
        return Integer.parseInt(text.trim(), radix);
    }

    public <T> String joinAll(List<T> parts) {
        StringBuilder sb = new StringBuilder();
        for (T p : parts) {
            sb.append(p);
        }
        return sb.toString();
    }
}
