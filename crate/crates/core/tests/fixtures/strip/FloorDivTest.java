package com.acme;

import org.junit.Test;
import static org.junit.Assert.*;

public class FloorDivTest {
    @Test
    public void divides() {
        int q = Math.floorDiv(-7, 2);
        assertEquals(-4, q);
        assertThrows(ArithmeticException.class, () -> Math.floorDiv(1, 0));
    }
}
