package fixture.ccn;

import java.util.List;

public class Spans {
    public int eight(int a, int b, List<String> xs) {
        int n = 0;
        if (a > 0) {
            n++;
        }
        if (b > 0 && a < 0) {
            n--;
        }
        for (String x : xs) {
            if (x.isEmpty() || x.length() > 10) {
                continue;
            }
            n += x.length();
        }
        while (n > 100) {
            n /= 2;
        }
        return n;
    }

    public String ten(char c) {
        switch (c) {
            case 'a':
            case 'e':
            case 'i':
            case 'o':
                return "vowel";
            case 'y':
                return "sometimes";
            case ' ':
                return "space";
            default:
                break;
        }
        if (Character.isDigit(c) || c == '_') {
            return "word";
        }
        return c > 127 ? "other" : "consonant";
    }

    public int thirteen(int[] xs, int lo, int hi, boolean strict) {
        if (xs == null || xs.length == 0) {
            return -1;
        }
        int found = -1;
        for (int i = 0; i < xs.length; i++) {
            int x = xs[i];
            if (strict && (x <= lo || x >= hi)) {
                continue;
            }
            if (!strict && (x < lo || x > hi)) {
                continue;
            }
            if (found < 0 || xs[found] > x) {
                found = i;
            }
        }
        found = found > 0 ? found : 0;
        return found;
    }

    public String fourteen(String s, int mode, boolean trim, boolean upper) {
        if (s == null) {
            return null;
        }
        String r = trim ? s.trim() : s;
        try {
            switch (mode) {
                case 0:
                    break;
                case 1:
                    r = r.replace('-', '_');
                    break;
                case 2:
                    r = r.isEmpty() ? r : r.substring(1);
                    break;
                case 3:
                    for (int i = 0; i < 2 && r.length() > 2; i++) {
                        r = r.substring(1);
                    }
                    break;
                default:
                    throw new IllegalStateException();
            }
        } catch (IllegalStateException e) {
            r = "";
        } catch (StringIndexOutOfBoundsException e) {
            return s;
        }
        while (r.contains(" ")) {
            r = r.replaceFirst(" ", "");
        }
        return upper ? r.toUpperCase() : r;
    }
}
