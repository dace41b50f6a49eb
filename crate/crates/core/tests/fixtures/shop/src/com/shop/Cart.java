package com.shop;

import java.util.ArrayList;
import java.util.List;

public class Cart {
    private final List<Item> items = new ArrayList<>();

    public void add(Item item) {
        if (item == null) {
            throw new NullPointerException("item");
        }
        items.add(item);
    }

    public Money total() {
        Money sum = Money.of(0);
        for (Item item : items) {
            sum = sum.plus(item.price());
        }
        return sum;
    }

    public int count(String sku) {
        int n = 0;
        for (Item item : items) {
            if (item.sku().equals(sku)) {
                n++;
            }
        }
        return n;
    }

    public boolean isEmpty() {
        return items.isEmpty();
    }
}
